#include <benchmark/benchmark.h>

#include "vqd/exact.hpp"
#include "vqd/fga.hpp"
#include "vqd/mctdh.hpp"

namespace {

using namespace vqd;

HamiltonianSpec make_quartic(int n, KineticScheme kin) {
  auto g = Grid::make_1d(-8.0, 8.0, n);
  Eigen::VectorXd v(static_cast<Eigen::Index>(g->size()));
  for (std::size_t p = 0; p < g->size(); ++p) {
    const double x = g->coordinate(p, 0);
    v[static_cast<Eigen::Index>(p)] = 0.25 * x * x * x * x;
  }
  return HamiltonianSpec(std::move(g), {1.0}, std::move(v), kin);
}

void bm_apply_h(benchmark::State& state, KineticScheme kin) {
  const int n = static_cast<int>(state.range(0));
  HamiltonianSpec h = make_quartic(n, kin);
  const WaveState psi = gaussian_state(h.grid_ptr(), {0.5}, {1.0}, {0.6});
  for (auto _ : state) {
    benchmark::DoNotOptimize(apply_h(h, psi));
  }
}

void bm_apply_h_spectral(benchmark::State& state) { bm_apply_h(state, KineticScheme::spectral); }
void bm_apply_h_fd(benchmark::State& state) { bm_apply_h(state, KineticScheme::finite_difference); }

void bm_dense_propagator_build(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  HamiltonianSpec h = make_quartic(n, KineticScheme::spectral);
  for (auto _ : state) {
    DensePropagator prop(dense_matrix(h, 1.0), 1.0);
    benchmark::DoNotOptimize(prop.eigenvalues());
  }
}

void bm_fga_rhs(benchmark::State& state) {
  HamiltonianSpec h = make_quartic(static_cast<int>(state.range(0)), KineticScheme::spectral);
  fga::CoherentState s{cdouble(1.0, 0.0), 0.5, 1.0, 0.0, 1.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(fga::fga_rhs(h, s));
  }
}

mctdh::MctdhSystem make_mctdh(int n) {
  mctdh::MctdhSystem sys;
  for (int k = 0; k < 2; ++k) {
    auto g = Grid::make_1d(-7.0, 7.0, n);
    Eigen::VectorXd v(static_cast<Eigen::Index>(g->size()));
    for (std::size_t p = 0; p < g->size(); ++p) {
      const double x = g->coordinate(p, 0);
      v[static_cast<Eigen::Index>(p)] = 0.5 * x * x;
    }
    sys.modes.push_back({std::move(g), 1.0, std::move(v)});
  }
  sys.coupling = tdh::Coupling::bilinear(0.2);
  return sys;
}

void bm_tangent_lsq(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  mctdh::MctdhSystem sys = make_mctdh(n);
  std::vector<std::vector<Eigen::VectorXcd>> raw(2);
  for (int k = 0; k < 2; ++k) {
    raw[static_cast<std::size_t>(k)].push_back(
        gaussian_state(sys.modes[static_cast<std::size_t>(k)].grid, {0.5}, {0.0}, {0.7}).amp());
    raw[static_cast<std::size_t>(k)].push_back(
        gaussian_state(sys.modes[static_cast<std::size_t>(k)].grid, {-0.5}, {0.3}, {0.8}).amp());
  }
  Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(2, 2);
  c(0, 0) = 1.0;
  const mctdh::MCTDHState s = mctdh::make_state(sys, std::move(raw), c);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mctdh::tangent_lsq(sys, s));
  }
}

void bm_gamma_operator(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  mctdh::MctdhSystem sys = make_mctdh(n);
  std::vector<std::vector<Eigen::VectorXcd>> raw(2);
  for (int k = 0; k < 2; ++k) {
    raw[static_cast<std::size_t>(k)].push_back(
        gaussian_state(sys.modes[static_cast<std::size_t>(k)].grid, {0.4}, {0.0}, {0.7}).amp());
  }
  Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(1, 1);
  c(0, 0) = 1.0;
  const mctdh::MCTDHState s = mctdh::make_state(sys, std::move(raw), c);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mctdh::gamma_operator(sys, s, 0));
  }
}

}  // namespace

BENCHMARK(bm_apply_h_spectral)->Arg(256)->Arg(1024)->Arg(4096);
BENCHMARK(bm_apply_h_fd)->Arg(256)->Arg(1024)->Arg(4096);
BENCHMARK(bm_dense_propagator_build)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_fga_rhs)->Arg(256)->Arg(1024);
BENCHMARK(bm_tangent_lsq)->Arg(24)->Arg(48)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_gamma_operator)->Arg(24)->Arg(48);

BENCHMARK_MAIN();

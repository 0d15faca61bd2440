#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "support.hpp"
#include "vqd/diagnostics.hpp"

using namespace vqd;
using vqd::testing::harmonic_h;
using vqd::testing::ho_eigenstate;
using vqd::testing::random_smooth_state;

namespace {

WaveState exact_derivative(const HamiltonianSpec& h, const WaveState& psi) {
  return cdouble(0.0, -1.0 / psi.hbar()) * apply_h(h, psi);
}

}  // namespace

TEST_CASE("standard gauge derivative: identities and orthogonality") {
  auto g = Grid::make_1d(-12.0, 12.0, 384);
  HamiltonianSpec h = vqd::testing::quartic_h(g, 1.0);
  std::mt19937_64 rng(17);
  const WaveState psi = random_smooth_state(g, rng);
  const auto [e_bar, var_e] = energy_moments(h, psi);

  // Exact derivative maps to -(i/hbar)(H - E)psi with norm dE/hbar.
  const WaveState plus = standard_gauge_derivative(psi, exact_derivative(h, psi), e_bar);
  const WaveState want = cdouble(0.0, -1.0) * (apply_h(h, psi) - (cdouble(e_bar, 0.0) * psi));
  CHECK(distance(plus, want) / norm(want) < 1e-9);
  CHECK(norm(plus) == doctest::Approx(std::sqrt(var_e)).epsilon(1e-9));
  CHECK(std::abs(inner(psi, plus)) < 1e-9 * norm(plus));

  // Eigenstate: pure-phase derivative vanishes in the standard gauge.
  HamiltonianSpec ho = harmonic_h(g, 1.0, 1.0);
  const WaveState eig = ho_eigenstate(g, 2, 1.0, 1.0);
  const WaveState eplus = standard_gauge_derivative(eig, exact_derivative(ho, eig), 2.5);
  CHECK(norm(eplus) < 1e-7);

  // Sloppy gauge input still comes out orthogonal.
  const WaveState messy = exact_derivative(h, psi) + (cdouble(0.3, -0.2) * psi);
  const WaveState fixed = standard_gauge_derivative(psi, messy, e_bar);
  CHECK(std::abs(inner(psi, fixed)) < 1e-12 * std::max(1.0, norm(fixed)));
}

TEST_CASE("local error: exact manifold, frozen state, stationarity violation") {
  auto g = Grid::make_1d(-12.0, 12.0, 384);
  HamiltonianSpec h = vqd::testing::quartic_h(g, 1.0);
  std::mt19937_64 rng(29);
  const WaveState psi = random_smooth_state(g, rng);

  // Whole-space manifold: the exact derivative has zero local error.
  ErrorReport full = local_error(h, psi, exact_derivative(h, psi));
  CHECK(full.eps < 1e-8);
  CHECK(full.eps_direct < 1e-8);
  CHECK(full.r_index == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(full.stationarity_ok);
  CHECK(boundedness_holds(full));

  // Frozen state (phase only): eps = dE/hbar, r = 0.
  ErrorReport frozen = local_error(h, psi, WaveState::zero(g, 1.0, 1));
  CHECK(frozen.eps == doctest::Approx(std::sqrt(frozen.var_e)).epsilon(1e-9));
  CHECK(frozen.eps_direct == doctest::Approx(frozen.eps).epsilon(1e-9));
  CHECK(frozen.r_index == doctest::Approx(0.0));
  CHECK(frozen.stationarity_ok);

  // A derivative that is not a stationary point gets flagged, not laundered.
  const WaveState overshoot = cdouble(2.0, 0.0) * exact_derivative(h, psi);
  ErrorReport bad = local_error(h, psi, overshoot);
  CHECK(!bad.stationarity_ok);
  CHECK(bad.eps_direct > 0.0);
}

TEST_CASE("local error is invariant under a Hamiltonian shift with compensating gauge") {
  auto g = Grid::make_1d(-12.0, 12.0, 384);
  HamiltonianSpec h = vqd::testing::quartic_h(g, 1.0);
  std::mt19937_64 rng(31);
  const WaveState psi = random_smooth_state(g, rng);
  // A nontrivial but stationary-ish derivative: the frozen-phase one.
  const WaveState psidot = WaveState::zero(g, 1.0, 1);

  ErrorReport base = local_error(h, psi, psidot);
  const double eps_shift = 0.37;
  ErrorReport shifted =
      local_error(h.shifted(eps_shift), psi,
                  psidot + (cdouble(0.0, eps_shift / psi.hbar()) * psi));
  CHECK(std::abs(base.eps - shifted.eps) < 1e-10 * std::max(1.0, base.eps));
  CHECK(std::abs(base.deriv_norm_sq - shifted.deriv_norm_sq) < 1e-10);
}

TEST_CASE("stationary states are recognized") {
  auto g = Grid::make_1d(-10.0, 10.0, 384);
  HamiltonianSpec ho = harmonic_h(g, 1.0, 1.0);
  const WaveState eig = ho_eigenstate(g, 0, 1.0, 1.0);
  ErrorReport rep = local_error(ho, eig, exact_derivative(ho, eig));
  CHECK(rep.stationary);
  CHECK(rep.eps == 0.0);

  CHECK(!r_index(0.0, 0.0, 1.0).has_value());
  CHECK(r_index(4.0, 1.0, 1.0).value() == doctest::Approx(0.5));
  CHECK(r_index(4.0, 100.0, 1.0).value() == doctest::Approx(1.0));  // clamped
  CHECK_THROWS_AS(r_index(-1.0, 0.0, 1.0), StructuralError);
}

TEST_CASE("relevant split reconstructs H psi and matches the ladder direction") {
  auto g = Grid::make_1d(-12.0, 12.0, 512);
  const double m = 1.0, w = 1.0, hbar = 1.0;
  HamiltonianSpec ho = harmonic_h(g, m, w);

  fga::CoherentState s{cdouble(0.8, -0.5), std::sqrt(hbar / (2.0 * m * w)), m, 0.0, hbar};
  const WaveState z = normalized(fga::coherent_to_grid(s, g));
  const auto split = relevant_split(ho, z);
  REQUIRE(split.has_value());
  CHECK(std::abs(inner(z, split->psi_perp)) < 1e-10);
  CHECK(norm(split->psi_perp) == doctest::Approx(1.0).epsilon(1e-9));

  // (a^dag - z*)|z> is the analytic direction.
  const WaveState ladder = normalized(fga::apply_raising(s, z) - (std::conj(s.z) * z));
  CHECK(std::abs(inner(ladder, split->psi_perp)) == doctest::Approx(1.0).epsilon(1e-7));

  // Reconstruction on a random state.
  std::mt19937_64 rng(41);
  const WaveState psi = random_smooth_state(g, rng);
  const auto sp = relevant_split(ho, psi);
  REQUIRE(sp.has_value());
  const WaveState recon =
      (cdouble(std::real(inner(psi, apply_h(ho, psi))), 0.0) * psi) +
      (cdouble(sp->delta_e, 0.0) * sp->psi_perp);
  CHECK(distance(recon, apply_h(ho, psi)) / norm(apply_h(ho, psi)) < 1e-9);

  CHECK(!relevant_split(ho, ho_eigenstate(g, 1, m, w)).has_value());
}

TEST_CASE("accumulated bound: trapezoid, monotone, ordering enforced") {
  std::vector<ErrorReport> reports(5);
  for (int i = 0; i < 5; ++i) {
    reports[static_cast<std::size_t>(i)].t = 0.5 * i;
    reports[static_cast<std::size_t>(i)].eps = 0.0;
  }
  auto zero = accumulate_bound(reports);
  for (double b : zero) CHECK(b == 0.0);

  for (auto& r : reports) r.eps = 0.3;
  const auto lin = accumulate_bound(reports);
  for (std::size_t i = 0; i < lin.size(); ++i) {
    CHECK(lin[i] == doctest::Approx(0.3 * reports[i].t).epsilon(1e-12));
  }
  for (std::size_t i = 1; i < lin.size(); ++i) CHECK(lin[i] >= lin[i - 1]);

  reports[2].t = 10.0;
  CHECK_THROWS_AS(accumulate_bound(reports), StructuralError);
}

TEST_CASE("guided error: degenerate guide, perfect guide, drift bound") {
  auto g = Grid::make_1d(-12.0, 12.0, 384);
  HamiltonianSpec h = vqd::testing::quartic_h(g, 1.0);
  std::mt19937_64 rng(53);
  const WaveState psi = random_smooth_state(g, rng);
  const WaveState zero = WaveState::zero(g, 1.0, 1);

  // Guide = 0 reduces to the ungauged local error.
  const WaveState full_dot = exact_derivative(h, psi);
  ErrorReport gr = guided_error(h, psi, full_dot, zero);
  CHECK(gr.eps < 1e-8);
  CHECK(gr.stationarity_ok);
  CHECK(std::abs(gr.energy_drift) < 1e-10);

  // Perfect effective Hamiltonian: all of the derivative is guided.
  ErrorReport gr2 = guided_error(h, psi, zero, full_dot);
  CHECK(gr2.eps < 1e-10);
  CHECK(std::abs(gr2.energy_drift) <= gr2.drift_bound + 1e-12);

  // A generic split still respects the Cauchy-Schwarz drift bound.
  const WaveState part = cdouble(0.4, 0.0) * full_dot;
  ErrorReport gr3 = guided_error(h, psi, part, full_dot - part);
  CHECK(std::abs(gr3.energy_drift) <=
        2.0 * gr3.eps_direct * gr3.guided_norm * (1.0 + 1e-9) + 1e-12);
}

TEST_CASE("diagnostics CSV carries the documented columns") {
  std::vector<ErrorReport> reports(2);
  reports[0].t = 0.0;
  reports[1].t = 1.0;
  reports[1].eps = 0.25;
  accumulate_bound(reports);
  const std::string path = "reports_tmp.csv";
  write_reports_csv(reports, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "t,eps,r,E_bar,var_E,deriv_norm_sq,bound_accum,eps_direct,stationarity_flag");
  std::remove(path.c_str());

  reports[0].guided = true;
  write_reports_csv(reports, path);
  std::ifstream in2(path);
  std::getline(in2, header);
  CHECK(header.find(",residual_guided,energy_drift,drift_bound") != std::string::npos);
  std::remove(path.c_str());
}

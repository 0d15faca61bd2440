#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>

#include "support.hpp"

using namespace vqd;
using vqd::testing::harmonic_h;
using vqd::testing::ho_eigenstate;
using vqd::testing::random_smooth_state;

TEST_CASE("grid construction and invariants") {
  auto g = Grid::make_1d(-5.0, 5.0, 64);
  CHECK(g->ndim() == 1);
  CHECK(g->dx(0) == doctest::Approx(10.0 / 63.0));
  CHECK(g->size() == 64);

  auto gp = Grid::make_1d(-5.0, 5.0, 64, Boundary::periodic);
  CHECK(gp->dx(0) == doctest::Approx(10.0 / 64.0));
  CHECK(gp->axis(0).back() == doctest::Approx(5.0 - gp->dx(0)));

  CHECK_THROWS_AS(Grid::make_1d(-1.0, 1.0, 4), StructuralError);
  CHECK_THROWS_AS(Grid::make_1d(1.0, -1.0, 32), StructuralError);
  CHECK_THROWS_AS(Grid::make({{-1.0, 1.0, 2048}, {-1.0, 1.0, 2048}}), StructuralError);

  auto g2 = Grid::make({{-2.0, 2.0, 16}, {-3.0, 3.0, 8}});
  CHECK(g2->size() == 128);
  CHECK(g2->stride(0) == 8);
  CHECK(g2->coordinate(8, 0) == doctest::Approx(g2->axis(0)[1]));
  CHECK(g2->coordinate(3, 1) == doctest::Approx(g2->axis(1)[3]));
}

TEST_CASE("inner products: orthogonality, normalization, coherent overlap") {
  auto g = Grid::make_1d(-10.0, 10.0, 512);
  const double m = 1.0, w = 1.0;

  for (int n = 0; n < 4; ++n) {
    for (int k = 0; k < 4; ++k) {
      const cdouble o = inner(ho_eigenstate(g, n, m, w), ho_eigenstate(g, k, m, w));
      if (n == k) {
        CHECK(std::abs(o - 1.0) < 1e-12);
      } else {
        CHECK(std::abs(o) < 1e-10);
      }
    }
  }

  const WaveState gauss = gaussian_state(g, {0.7}, {0.3}, {0.9});
  CHECK(std::abs(inner(gauss, gauss) - 1.0) < 1e-12);

  // Coherent overlap <z1|z2> = exp(-|z1|^2/2 - |z2|^2/2 + conj(z1) z2).
  fga::CoherentState s1{cdouble(0.4, -0.3), 0.7, 1.0, 0.0, 1.0};
  fga::CoherentState s2{cdouble(-0.2, 0.5), 0.7, 1.0, 0.0, 1.0};
  const cdouble got = inner(fga::coherent_to_grid(s1, g), fga::coherent_to_grid(s2, g));
  const cdouble want = std::exp(-0.5 * std::norm(s1.z) - 0.5 * std::norm(s2.z) +
                                std::conj(s1.z) * s2.z);
  CHECK(std::abs(got - want) < 1e-8);

  auto other = Grid::make_1d(-10.0, 10.0, 256);
  CHECK_THROWS_AS(inner(gauss, gaussian_state(other, {0.0}, {0.0}, {1.0})), StructuralError);
}

TEST_CASE("apply_h eigenstates and discretization agreement") {
  auto g = Grid::make_1d(-12.0, 12.0, 1024);
  const double m = 1.3, w = 0.9, hbar = 1.0;
  HamiltonianSpec h = harmonic_h(g, m, w);

  const WaveState psi0 = ho_eigenstate(g, 0, m, w, hbar);
  const WaveState hpsi = apply_h(h, psi0);
  const WaveState want = cdouble(0.5 * hbar * w, 0.0) * psi0;
  CHECK(distance(hpsi, want) / norm(want) < 1e-8);

  // Plane wave on a periodic grid is a kinetic eigenstate of the spectral
  // scheme.
  auto gp = Grid::make_1d(0.0, 16.0, 128, Boundary::periodic);
  HamiltonianSpec free_h(gp, {m}, Eigen::VectorXd::Zero(128), KineticScheme::spectral);
  const double k = 2.0 * vqd::testing::kPi * 5.0 / 16.0;
  Eigen::VectorXcd amp(128);
  for (std::size_t p = 0; p < gp->size(); ++p) {
    amp[static_cast<Eigen::Index>(p)] = std::exp(cdouble(0.0, k * gp->coordinate(p, 0)));
  }
  WaveState plane(gp, amp, hbar, 1);
  plane = normalized(plane);
  const WaveState tpsi = apply_h(free_h, plane);
  const double e_k = hbar * hbar * k * k / (2.0 * m);
  CHECK(distance(tpsi, cdouble(e_k, 0.0) * plane) / e_k < 1e-10);

  // The two kinetic discretizations agree on smooth states.
  auto gs = Grid::make_1d(-16.0, 16.0, 4096, Boundary::periodic);
  std::mt19937_64 rng(7);
  HamiltonianSpec hs(gs, {m}, Eigen::VectorXd::Zero(4096), KineticScheme::spectral);
  HamiltonianSpec hf(gs, {m}, Eigen::VectorXd::Zero(4096), KineticScheme::finite_difference);
  for (int trial = 0; trial < 3; ++trial) {
    const WaveState psi = random_smooth_state(gs, rng);
    const WaveState a = apply_h(hs, psi);
    const WaveState b = apply_h(hf, psi);
    CHECK(distance(a, b) / norm(a) < 1e-8);
  }
}

TEST_CASE("hermiticity on random smooth states") {
  auto g = Grid::make_1d(-14.0, 14.0, 768);
  std::mt19937_64 rng(21);
  for (KineticScheme kin : {KineticScheme::spectral, KineticScheme::finite_difference}) {
    HamiltonianSpec h = harmonic_h(g, 1.0, 1.0, 0.3, kin);
    for (int trial = 0; trial < 5; ++trial) {
      const WaveState phi = random_smooth_state(g, rng);
      const WaveState psi = random_smooth_state(g, rng);
      const WaveState hpsi = apply_h(h, psi);
      const WaveState hphi = apply_h(h, phi);
      const double lhs = std::abs(inner(phi, hpsi) - std::conj(inner(psi, hphi)));
      CHECK(lhs < 1e-9 * norm(phi) * norm(hpsi));
    }
  }
}

TEST_CASE("energy moments: eigenstate, coherent variance, shift invariance") {
  auto g = Grid::make_1d(-10.0, 10.0, 512);
  const double m = 1.0, w = 1.0, hbar = 1.0;
  HamiltonianSpec h = harmonic_h(g, m, w);

  for (int n : {0, 2}) {
    const auto [e, var] = energy_moments(h, ho_eigenstate(g, n, m, w));
    CHECK(e == doctest::Approx(hbar * w * (n + 0.5)).epsilon(1e-9));
    CHECK(std::abs(var) < 1e-9);
  }

  // Coherent state: var_E = (hbar w)^2 |z|^2.
  fga::CoherentState s{cdouble(0.8, -0.6), std::sqrt(hbar / (2.0 * m * w)), m, 0.0, hbar};
  const WaveState zstate = normalized(fga::coherent_to_grid(s, g));
  const auto [e_z, var_z] = energy_moments(h, zstate);
  CHECK(e_z == doctest::Approx(hbar * w * (std::norm(s.z) + 0.5)).epsilon(1e-8));
  CHECK(var_z == doctest::Approx(hbar * w * hbar * w * std::norm(s.z)).epsilon(1e-6));

  const auto [e_shift, var_shift] = energy_moments(h.shifted(0.37), zstate);
  CHECK(e_shift == doctest::Approx(e_z - 0.37).epsilon(1e-12));
  CHECK(std::abs(var_shift - var_z) < 1e-12 * std::max(1.0, var_z));

  WaveState unnorm(g, 2.0 * zstate.amp(), hbar, 1);
  CHECK_THROWS_AS(energy_moments(h, unnorm), StructuralError);
}

TEST_CASE("grid refinement stability of the moments") {
  const double m = 1.0, w = 1.0;
  auto coarse = Grid::make_1d(-10.0, 10.0, 256);
  auto fine = Grid::make_1d(-10.0, 10.0, 512);
  fga::CoherentState s{cdouble(0.5, 0.4), std::sqrt(0.5), m, 0.0, 1.0};
  const auto [e1, v1] = energy_moments(harmonic_h(coarse, m, w),
                                       normalized(fga::coherent_to_grid(s, coarse)));
  const auto [e2, v2] = energy_moments(harmonic_h(fine, m, w),
                                       normalized(fga::coherent_to_grid(s, fine)));
  CHECK(std::abs(e1 - e2) / std::abs(e2) < 1e-7);
  CHECK(std::abs(v1 - v2) / std::abs(v2) < 1e-7);
}

TEST_CASE("finite-difference kinetic matches its plane-wave symbol") {
  auto gp = Grid::make_1d(0.0, 8.0, 64, Boundary::periodic);
  const double m = 2.0, hbar = 1.0;
  HamiltonianSpec h(gp, {m}, Eigen::VectorXd::Zero(64), KineticScheme::finite_difference);
  const double k = 2.0 * vqd::testing::kPi * 3.0 / 8.0;
  Eigen::VectorXcd amp(64);
  for (std::size_t p = 0; p < gp->size(); ++p) {
    amp[static_cast<Eigen::Index>(p)] = std::exp(cdouble(0.0, k * gp->coordinate(p, 0)));
  }
  const WaveState plane = normalized(WaveState(gp, amp, hbar, 1));
  const double dx = gp->dx(0);
  const double symbol = hbar * hbar / (2.0 * m) *
                        (30.0 - 32.0 * std::cos(k * dx) + 2.0 * std::cos(2.0 * k * dx)) /
                        (12.0 * dx * dx);
  CHECK(distance(apply_h(h, plane), cdouble(symbol, 0.0) * plane) / symbol < 1e-12);
}

TEST_CASE("boxed decay warning is reported, not fatal") {
  auto g = Grid::make_1d(-3.0, 3.0, 64);
  HamiltonianSpec h = harmonic_h(g, 1.0, 1.0);
  const WaveState wide = gaussian_state(g, {0.0}, {0.0}, {2.5});  // not decayed
  WarningLog log;
  CHECK_NOTHROW(apply_h(h, wide, &log));
  CHECK(!log.empty());

  WarningLog log2;
  apply_h(h, gaussian_state(g, {0.0}, {0.0}, {0.3}), &log2);
  CHECK(log2.empty());
}

TEST_CASE("diabatic hamiltonian acts on channels and stays Hermitian") {
  auto g = Grid::make_1d(-4.0, 4.0, 96);
  std::vector<Eigen::MatrixXcd> dia;
  for (std::size_t p = 0; p < g->size(); ++p) {
    const double x = g->coordinate(p, 0);
    Eigen::MatrixXcd m(2, 2);
    m << 0.3 * x, 0.1, 0.1, -0.3 * x;
    dia.push_back(m);
  }
  HamiltonianSpec h(g, {1.0}, dia);
  CHECK(h.n_channels() == 2);

  std::mt19937_64 rng(5);
  const WaveState base = random_smooth_state(g, rng);
  Eigen::VectorXcd amp(2 * base.amp().size());
  amp << base.amp(), 0.5 * base.amp();
  WaveState psi = normalized(WaveState(g, amp, 1.0, 2));
  const WaveState hpsi = apply_h(h, psi);
  // Hermiticity across channels.
  Eigen::VectorXcd amp2(2 * base.amp().size());
  amp2 << cdouble(0.0, 1.0) * base.amp(), base.amp();
  WaveState phi = normalized(WaveState(g, amp2, 1.0, 2));
  CHECK(std::abs(inner(phi, hpsi) - std::conj(inner(psi, apply_h(h, phi)))) <
        1e-9 * norm(phi) * norm(hpsi));

  // Channel count must match.
  CHECK_THROWS_AS(apply_h(h, base), StructuralError);
}

TEST_CASE("potential tables round-trip through CSV") {
  const std::string path = "test_potential_tmp.csv";
  {
    std::ofstream out(path);
    out << "x,V\n";
    char row[80];
    for (int i = 0; i < 16; ++i) {
      const double x = -2.0 + 4.0 * i / 15.0;
      std::snprintf(row, sizeof(row), "%.17g,%.17g\n", x, 0.5 * x * x);
      out << row;
    }
  }
  const PotentialTable table = load_potential_csv(path);
  CHECK(table.n_el == 1);
  CHECK(table.axes.size() == 1);
  CHECK(table.axes[0].n_points == 16);

  auto g = Grid::make_1d(-2.0, 2.0, 16);
  HamiltonianSpec h = hamiltonian_from_table(g, {1.0}, table);
  CHECK(h.potential()[0] == doctest::Approx(2.0));

  auto wrong = Grid::make_1d(-2.0, 2.0, 32);
  CHECK_THROWS_AS(hamiltonian_from_table(wrong, {1.0}, table), StructuralError);
  std::remove(path.c_str());

  const std::string dpath = "test_diabatic_tmp.csv";
  {
    std::ofstream out(dpath);
    out << "x,V11,V12,V22\n";
    char row[120];
    for (int i = 0; i < 12; ++i) {
      const double x = -1.0 + 2.0 * i / 11.0;
      std::snprintf(row, sizeof(row), "%.17g,%.17g,0.2,%.17g\n", x, x, -x);
      out << row;
    }
  }
  const PotentialTable dia = load_potential_csv(dpath);
  CHECK(dia.n_el == 2);
  CHECK(dia.diabatic.size() == 12);
  CHECK(std::real(dia.diabatic[0](0, 1)) == doctest::Approx(0.2));
  std::remove(dpath.c_str());
}

TEST_CASE("table derivative is 4th order in the interior") {
  auto g = Grid::make_1d(-3.0, 3.0, 256);
  Eigen::VectorXd f(static_cast<Eigen::Index>(g->size()));
  for (std::size_t p = 0; p < g->size(); ++p) {
    const double x = g->coordinate(p, 0);
    f[static_cast<Eigen::Index>(p)] = std::sin(1.3 * x);
  }
  const Eigen::VectorXd df = table_derivative(*g, f, 0);
  double worst = 0.0;
  for (std::size_t p = 8; p + 8 < g->size(); ++p) {
    const double x = g->coordinate(p, 0);
    worst = std::max(worst,
                     std::abs(df[static_cast<Eigen::Index>(p)] - 1.3 * std::cos(1.3 * x)));
  }
  CHECK(worst < 1e-6);
}

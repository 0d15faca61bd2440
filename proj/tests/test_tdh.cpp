#include <doctest.h>

#include "support.hpp"
#include "vqd/exact.hpp"
#include "vqd/tdh.hpp"

using namespace vqd;
using namespace vqd::tdh;
using vqd::testing::ho_eigenstate;

namespace {

TdhSystem two_mode_system(double c, int n = 32, double w2 = 1.3) {
  TdhSystem sys;
  for (int k = 0; k < 2; ++k) {
    auto g = Grid::make_1d(-7.5, 7.5, n, Boundary::periodic);
    const double w = k == 0 ? 1.0 : w2;
    Eigen::VectorXd v(static_cast<Eigen::Index>(g->size()));
    for (std::size_t p = 0; p < g->size(); ++p) {
      const double x = g->coordinate(p, 0);
      v[static_cast<Eigen::Index>(p)] = 0.5 * w * w * x * x;
    }
    sys.modes.push_back({std::move(g), 1.0, std::move(v)});
  }
  sys.coupling = c == 0.0 ? Coupling::none() : Coupling::bilinear(c);
  return sys;
}

TDHState gaussian_product(const TdhSystem& sys, double c1 = 1.0, double c2 = -0.8) {
  std::vector<WaveState> spfs;
  spfs.push_back(gaussian_state(sys.modes[0].grid, {c1}, {0.0}, {0.707106781186547}, sys.hbar));
  spfs.push_back(gaussian_state(sys.modes[1].grid, {c2}, {0.0}, {0.62}, sys.hbar));
  return make_state(sys, std::move(spfs));
}

}  // namespace

TEST_CASE("mean-field Hamiltonian: separable shift verbatim, bilinear contraction") {
  TdhSystem sep = two_mode_system(0.0);
  TDHState s = gaussian_product(sep);

  // Separable: H_1 = h_1 + eps_2 exactly.
  const Eigen::MatrixXcd h1 = mean_field_h(sep, s, 0);
  HamiltonianSpec one(sep.modes[0].grid, {1.0}, sep.modes[0].potential);
  const auto [eps2, var2] = energy_moments(HamiltonianSpec(sep.modes[1].grid, {1.0},
                                                           sep.modes[1].potential),
                                           s.spfs[1]);
  (void)var2;
  const Eigen::MatrixXcd want =
      dense_matrix(one, sep.hbar) + eps2 * Eigen::MatrixXcd::Identity(h1.rows(), h1.cols());
  CHECK((h1 - want).cwiseAbs().maxCoeff() < 1e-10);

  // Bilinear: the mean-field potential equals the explicit partial trace.
  TdhSystem bil = two_mode_system(0.35);
  const Eigen::VectorXd v0 = mean_field_potential(bil, s, 0);
  const Eigen::VectorXd w_joint = coupling_table(bil);
  const auto joint = joint_grid(bil);
  Eigen::VectorXd direct = Eigen::VectorXd::Zero(v0.size());
  const double dx2 = bil.modes[1].grid->dx(0);
  for (std::size_t p = 0; p < joint->size(); ++p) {
    const auto i = static_cast<Eigen::Index>(p / joint->stride(0));
    const auto j = static_cast<Eigen::Index>(p % joint->stride(0));
    direct[i] += w_joint[static_cast<Eigen::Index>(p)] *
                 std::norm(s.spfs[1].amp()[j]) * dx2;
  }
  CHECK((v0 - direct).cwiseAbs().maxCoeff() < 1e-9);

  // <phi_i|H_i|phi_i> agree across modes (both equal the total energy).
  const double e0 = std::real(s.spfs[0].amp().dot(mean_field_h(bil, s, 0) * s.spfs[0].amp())) *
                    bil.modes[0].grid->cell_volume();
  const double e1 = std::real(s.spfs[1].amp().dot(mean_field_h(bil, s, 1) * s.spfs[1].amp())) *
                    bil.modes[1].grid->cell_volume();
  CHECK(std::abs(e0 - e1) < 1e-10 * std::max(1.0, std::abs(e0)));
  CHECK(e0 == doctest::Approx(mean_energy(bil, s)).epsilon(1e-10));
}

TEST_CASE("tdh_rhs: norm conservation, eigenstate products, mean-field identity") {
  TdhSystem bil = two_mode_system(0.25);
  TDHState s = gaussian_product(bil);
  const TdhRates rates = tdh_rhs(bil, s);
  for (std::size_t i = 0; i < s.spfs.size(); ++i) {
    CHECK(std::abs(std::real(inner(s.spfs[i], rates.spf_dots[i]))) < 1e-12);
  }

  // Eigenstate product in a separable Hamiltonian: all derivatives vanish in
  // this gauge (pure phase lives in the global phase).
  TdhSystem sep = two_mode_system(0.0, 64);
  std::vector<WaveState> eig;
  eig.push_back(ho_eigenstate(sep.modes[0].grid, 0, 1.0, 1.0));
  eig.push_back(ho_eigenstate(sep.modes[1].grid, 1, 1.0, 1.3));
  TDHState es = make_state(sep, std::move(eig));
  const TdhRates er = tdh_rhs(sep, es);
  CHECK(norm(er.spf_dots[0]) < 1e-7);
  CHECK(norm(er.spf_dots[1]) < 1e-7);
  const WaveState joint_dot = joint_derivative(sep, es);
  const WaveState psi = hartree_to_grid(sep, es);
  // Standard-gauge derivative of a stationary product is zero.
  const WaveState plus = standard_gauge_derivative(normalized(psi), joint_dot,
                                                   mean_energy(sep, es));
  CHECK(norm(plus) < 1e-7);

  // i hbar d/dt Psi = H_mf^0 Psi + E Psi on the joint grid.
  const WaveState psi_c = hartree_to_grid(bil, s);
  const WaveState lhs = cdouble(0.0, bil.hbar) * joint_derivative(bil, s);
  Eigen::MatrixXcd h0 = mean_field_h(bil, s, 0);
  Eigen::MatrixXcd h1 = mean_field_h(bil, s, 1);
  const double e_bar = mean_energy(bil, s);
  const auto joint = joint_grid(bil);
  const auto n2 = static_cast<Eigen::Index>(bil.modes[1].grid->size());
  Eigen::MatrixXcd psi_mat(h0.rows(), n2);
  for (Eigen::Index i = 0; i < h0.rows(); ++i) {
    psi_mat.row(i) = psi_c.amp().segment(i * n2, n2).transpose();
  }
  Eigen::MatrixXcd rhs_mat = h0 * psi_mat + psi_mat * h1.transpose() - e_bar * psi_mat;
  Eigen::VectorXcd rhs_amp(psi_c.amp().size());
  for (Eigen::Index i = 0; i < h0.rows(); ++i) rhs_amp.segment(i * n2, n2) = rhs_mat.row(i);
  CHECK((lhs.amp() - rhs_amp).norm() * std::sqrt(joint->cell_volume()) /
            norm(lhs) <
        1e-8);
}

TEST_CASE("tdh_error: separable is exact, bilinear matches the joint diagnostics") {
  TdhSystem sep = two_mode_system(0.0);
  TDHState s = gaussian_product(sep);
  const MeanFieldDecomposition d0 = tdh_error(sep, s);
  CHECK(d0.eps_mf < 1e-9);
  CHECK(d0.var_dv < 1e-18);
  CHECK(d0.r_mf == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(d0.dv_mean) < 1e-10);

  TdhSystem bil = two_mode_system(0.25);
  const MeanFieldDecomposition d = tdh_error(bil, s);
  const HamiltonianSpec joint_h = joint_hamiltonian(bil);
  const ErrorReport rep = local_error(joint_h, normalized(hartree_to_grid(bil, s)),
                                      joint_derivative(bil, s));
  CHECK(std::abs(d.eps_mf - rep.eps) < 1e-7 * rep.eps);
  CHECK(rep.stationarity_ok);
  // hbar^2 ||psidot_plus||^2 = var_mf.
  CHECK(std::abs(bil.hbar * bil.hbar * rep.deriv_norm_sq - d.var_mf) < 1e-8 * d.var_mf);
  // Bilinear coupling on a product state has a vanishing cross term.
  CHECK(std::abs(d.cross) < 1e-10 * d.var_e);
  CHECK(d.r_mf >= d.r_lower - 1e-9);
}

TEST_CASE("variance decomposition on random coupled states") {
  TdhSystem sys = two_mode_system(0.2);
  // Add a tabulated residual so the cross term is genuinely nonzero.
  const auto n1 = static_cast<Eigen::Index>(sys.modes[0].grid->size());
  const auto n2 = static_cast<Eigen::Index>(sys.modes[1].grid->size());
  Eigen::MatrixXd w(n1, n2);
  for (Eigen::Index i = 0; i < n1; ++i) {
    for (Eigen::Index j = 0; j < n2; ++j) {
      const double x = sys.modes[0].grid->axis(0)[static_cast<std::size_t>(i)];
      const double y = sys.modes[1].grid->axis(0)[static_cast<std::size_t>(j)];
      w(i, j) = 0.2 * x * y + 0.15 * std::exp(-0.5 * (x - y) * (x - y));
    }
  }
  sys.coupling = Coupling::tabulated(w);

  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 4; ++trial) {
    std::vector<WaveState> spfs;
    spfs.push_back(vqd::testing::random_smooth_state(sys.modes[0].grid, rng));
    spfs.push_back(vqd::testing::random_smooth_state(sys.modes[1].grid, rng));
    TDHState s = make_state(sys, std::move(spfs));
    const MeanFieldDecomposition d = tdh_error(sys, s);
    CHECK(std::abs(d.var_e - (d.var_mf + d.var_dv + d.cross)) < 1e-8 * d.var_e);
    CHECK(std::abs(d.dv_mean) < 1e-10);
    // Cauchy-Schwarz on the cross term and the induced r lower bound.
    CHECK(std::abs(0.5 * d.cross) <=
          std::sqrt(d.var_mf) * std::sqrt(d.var_dv) * (1.0 + 1e-9));
    CHECK(d.r_mf >= d.r_lower - 1e-9);
  }
}

TEST_CASE("hartree_to_grid: 2D Gaussian, observable factorization") {
  TdhSystem sys = two_mode_system(0.0);
  TDHState s = gaussian_product(sys, 0.6, -0.4);
  const WaveState joint = hartree_to_grid(sys, s);
  CHECK(std::abs(norm(joint) - 1.0) < 1e-9);

  const WaveState direct = [&] {
    auto g = joint_grid(sys);
    return gaussian_state(g, {0.6, -0.4}, {0.0, 0.0}, {0.707106781186547, 0.62}, sys.hbar);
  }();
  CHECK(std::abs(std::abs(inner(joint, direct)) - 1.0) < 1e-9);

  // <x_1 (x) 1> factorizes.
  const double joint_mean =
      std::real(inner(joint, multiply_coordinate(joint, 0))) / norm_sq(joint);
  const double mode_mean = std::real(inner(s.spfs[0], multiply_coordinate(s.spfs[0], 0)));
  CHECK(std::abs(joint_mean - mode_mean) < 1e-10);
}

TEST_CASE("separable propagation matches the oracle; eigenproduct stays put") {
  TdhSystem sep = two_mode_system(0.0);
  TDHState s0 = gaussian_product(sep);
  WarningLog log;
  TdhRun run = propagate(sep, s0, 3.0, 31, {}, &log);
  const HamiltonianSpec joint_h = joint_hamiltonian(sep);
  Trajectory oracle = propagate_exact(joint_h, normalized(hartree_to_grid(sep, s0)), 3.0, 31);
  for (std::size_t i = 0; i < run.times.size(); ++i) {
    CHECK(distance(hartree_to_grid(sep, run.states[i]), oracle.states[i]) < 1e-6);
    CHECK(run.reports[i].eps < 1e-8);
  }
}

TEST_CASE("bilinear propagation: diagnostics certified and bound respected") {
  TdhSystem bil = two_mode_system(0.25);
  TDHState s0 = gaussian_product(bil);
  TdhRun run = propagate(bil, s0, 2.5, 41);
  const HamiltonianSpec joint_h = joint_hamiltonian(bil);
  Trajectory oracle =
      propagate_exact(joint_h, normalized(hartree_to_grid(bil, s0)), 2.5, 41);
  double drift = 0.0;
  for (std::size_t i = 0; i < run.times.size(); ++i) {
    const ErrorReport& rep = run.reports[i];
    CHECK(rep.stationarity_ok);
    CHECK(boundedness_holds(rep));
    const double d = distance(hartree_to_grid(bil, run.states[i]), oracle.states[i]);
    CHECK(d <= rep.bound_accum * (1.0 + 1e-6) + 1e-12);
    drift = std::max(drift, std::abs(rep.e_bar - run.reports[0].e_bar));
    CHECK(run.decomps[i].r_mf >= run.decomps[i].r_lower - 1e-9);
  }
  CHECK(drift < 1e-7);
}

TEST_CASE("three coupled modes stay behind the grid cap and decompose") {
  TdhSystem sys;
  for (int k = 0; k < 3; ++k) {
    auto g = Grid::make_1d(-6.0, 6.0, 16, Boundary::periodic);
    Eigen::VectorXd v(static_cast<Eigen::Index>(g->size()));
    for (std::size_t p = 0; p < g->size(); ++p) {
      const double x = g->coordinate(p, 0);
      v[static_cast<Eigen::Index>(p)] = 0.5 * (1.0 + 0.2 * k) * x * x;
    }
    sys.modes.push_back({std::move(g), 1.0, std::move(v)});
  }
  sys.coupling = Coupling::bilinear_terms({{0, 1, 0.2}, {1, 2, -0.15}});

  std::vector<WaveState> spfs;
  for (int k = 0; k < 3; ++k) {
    spfs.push_back(gaussian_state(sys.modes[static_cast<std::size_t>(k)].grid,
                                  {0.5 - 0.3 * k}, {0.0}, {0.7}, sys.hbar));
  }
  TDHState s = make_state(sys, std::move(spfs));
  const MeanFieldDecomposition d = tdh_error(sys, s);
  CHECK(std::abs(d.var_e - (d.var_mf + d.var_dv + d.cross)) < 1e-8 * d.var_e);
  CHECK(d.r_mf >= d.r_lower - 1e-9);

  const ErrorReport rep = local_error(joint_hamiltonian(sys),
                                      normalized(hartree_to_grid(sys, s)),
                                      joint_derivative(sys, s));
  CHECK(std::abs(d.eps_mf - rep.eps) < 1e-7 * std::max(rep.eps, 1e-12));
}

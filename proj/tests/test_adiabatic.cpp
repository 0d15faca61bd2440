#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "support.hpp"
#include "vqd/adiabatic.hpp"
#include "vqd/exact.hpp"

using namespace vqd;
using namespace vqd::adia;

namespace {

AdiabaticModel crossing_model(int n = 384, double gap = 0.02, double mass = 2000.0) {
  auto g = Grid::make_1d(-10.0, 10.0, n);
  return build_model(g, mass, 1.0, avoided_crossing_tanh(*g, 0.01, 2.0, gap, 2.0));
}

NuclearState packet(const AdiabaticModel& model, double center = -4.0, double momentum = 15.0,
                    double width = 0.45, int surface = 0) {
  return {gaussian_state(model.grid, {center}, {momentum}, {width}, model.hbar), surface};
}

}  // namespace

TEST_CASE("model build: continuity, anti-Hermiticity, curvature identity") {
  const AdiabaticModel model = crossing_model(1024);
  const auto np = static_cast<Eigen::Index>(model.grid->size());

  for (Eigen::Index p = 1; p < np; ++p) {
    for (int n = 0; n < model.n_el; ++n) {
      CHECK(model.frames[static_cast<std::size_t>(p - 1)].col(n).dot(
                model.frames[static_cast<std::size_t>(p)].col(n)) > 0.0);
    }
  }

  // <Phi_n|dPhi_m> + <dPhi_n|Phi_m> = 0 (interior points; the boxed edges use
  // one-sided stencils and carry no nuclear density in the scenarios).
  double worst1 = 0.0;
  for (Eigen::Index p = 3; p + 3 < np; ++p) {
    for (int n = 0; n < model.n_el; ++n) {
      for (int m = 0; m < model.n_el; ++m) {
        worst1 = std::max(worst1, std::abs(model.coupling1(n, m)[p] +
                                           model.coupling1(m, n)[p]));
      }
    }
  }
  CHECK(worst1 < 1e-8);

  // <Phi_n|d2 Phi_m> + 2 <dPhi_n|dPhi_m> + <d2 Phi_n|Phi_m> = 0.
  const double dx = model.grid->dx(0);
  double worst2 = 0.0;
  for (Eigen::Index p = 4; p + 4 < np; ++p) {
    for (int n = 0; n < model.n_el; ++n) {
      for (int m = 0; m < model.n_el; ++m) {
        Eigen::VectorXd dn = Eigen::VectorXd::Zero(model.n_el);
        Eigen::VectorXd dm = Eigen::VectorXd::Zero(model.n_el);
        static const double c1[3] = {3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0};
        for (long k = 1; k <= 3; ++k) {
          dn += c1[k - 1] * (model.frames[static_cast<std::size_t>(p + k)].col(n) -
                             model.frames[static_cast<std::size_t>(p - k)].col(n));
          dm += c1[k - 1] * (model.frames[static_cast<std::size_t>(p + k)].col(m) -
                             model.frames[static_cast<std::size_t>(p - k)].col(m));
        }
        dn /= dx;
        dm /= dx;
        const double lhs = model.coupling2(n, m)[p] + 2.0 * dn.dot(dm) +
                           model.coupling2(m, n)[p];
        worst2 = std::max(worst2, std::abs(lhs));
      }
    }
  }
  CHECK(worst2 < 1e-6);
}

TEST_CASE("halving the grid step moves the couplings by less than 1e-6") {
  const AdiabaticModel coarse = crossing_model(384);
  const AdiabaticModel fine = crossing_model(767);  // boxed: shares every other point
  double worst = 0.0;
  for (Eigen::Index p = 4; p + 4 < static_cast<Eigen::Index>(coarse.grid->size()); ++p) {
    worst = std::max(worst, std::abs(coarse.coupling1(0, 1)[p] - fine.coupling1(0, 1)[2 * p]));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("reduced kinetic operators: adjoint pairing and Hermitian H_n") {
  const AdiabaticModel model = crossing_model(768);
  const Eigen::MatrixXcd t01 = reduced_kinetic(model, 0, 1);
  const Eigen::MatrixXcd t10 = reduced_kinetic(model, 1, 0);
  const double scale = std::max(1.0, t01.cwiseAbs().maxCoeff());
  CHECK((t01.adjoint() - t10).cwiseAbs().maxCoeff() / scale < 1e-8);

  for (int n = 0; n < 2; ++n) {
    const Eigen::MatrixXcd hn = bo_hamiltonian(model, n);
    CHECK((hn - hn.adjoint()).cwiseAbs().maxCoeff() /
              std::max(1.0, hn.cwiseAbs().maxCoeff()) <
          1e-8);
  }

  // Time-reversal invariant model: the diagonal first-derivative coupling
  // vanishes.
  double diag1 = 0.0;
  for (int n = 0; n < model.n_el; ++n) {
    diag1 = std::max(diag1, model.coupling1(n, n).cwiseAbs().maxCoeff());
  }
  CHECK(diag1 < 1e-9);
}

TEST_CASE("zero diabatic coupling: bare surfaces, zero error") {
  auto g = Grid::make_1d(-10.0, 10.0, 256);
  const double mass = 1000.0;
  const AdiabaticModel model =
      build_model(g, mass, 1.0, linear_vibronic(*g, 4.0, 0.3, 0.3, 0.0));

  // H_n = T + E_n(X) verbatim.
  const Eigen::MatrixXcd hn = bo_hamiltonian(model, 0);
  const HamiltonianSpec kin(g, {mass}, Eigen::VectorXd::Zero(256));
  Eigen::MatrixXcd want = dense_matrix(kin, 1.0);
  want += model.energies.col(0).cast<cdouble>().asDiagonal();
  CHECK((hn - want).cwiseAbs().maxCoeff() < 1e-10);

  const NuclearState s = packet(model, -3.0, 8.0, 0.5);
  CHECK(bo_error_fluctuation(model, s) < 1e-9);
  const TransitionError te = bo_error_transitions(model, s);
  CHECK(te.eps < 1e-9);
  for (double c : te.per_m) CHECK(c < 1e-18);
}

TEST_CASE("two error forms agree on the avoided crossing") {
  const AdiabaticModel model = crossing_model();
  for (double center : {-2.0, 0.0, 1.5}) {
    const NuclearState s = packet(model, center, 12.0, 0.5);
    const double ef = bo_error_fluctuation(model, s);
    const TransitionError te = bo_error_transitions(model, s);
    CHECK(std::abs(ef - te.eps) < 1e-6 * std::max(ef, te.eps));
    CHECK(te.per_m.size() == 1);
    CHECK(te.per_m[0] == doctest::Approx(te.eps * te.eps).epsilon(1e-12));
  }
}

TEST_CASE("Hellmann-Feynman force equals the gap-weighted derivative coupling") {
  const AdiabaticModel model = crossing_model(384);
  const Eigen::VectorXd f_hf = force_matrix_element(model, 1, 0);
  const auto np = static_cast<Eigen::Index>(model.grid->size());
  double worst = 0.0;
  for (Eigen::Index p = 4; p + 4 < np; ++p) {
    const double de = model.energies(p, 1) - model.energies(p, 0);
    const double alt = de * model.coupling1(1, 0)[p];
    worst = std::max(worst, std::abs(f_hf[p] - alt));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("near-degeneracy is refused with the crossing location") {
  auto g = Grid::make_1d(-4.0, 4.0, 128);
  // Uncoupled linear crossing: surfaces touch at X = 0.
  const AdiabaticModel model = build_model(g, 500.0, 1.0,
                                           linear_vibronic(*g, 0.0, 0.5, -0.5, 0.0));
  const NuclearState s = {gaussian_state(g, {0.0}, {0.0}, {0.6}), 0};
  CHECK_THROWS_WITH_AS(bo_error_transitions(model, s, 0.05),
                       doctest::Contains("degenerate"), StructuralError);
}

TEST_CASE("gap scaling: doubling the gap halves the derivative-coupling error") {
  auto g = Grid::make_1d(-6.0, 6.0, 256);
  const double mass = 1000.0;
  auto eps_for = [&](double delta) {
    std::vector<Eigen::MatrixXd> dia;
    for (std::size_t p = 0; p < g->size(); ++p) {
      const double x = g->coordinate(p, 0);
      Eigen::MatrixXd m(2, 2);
      m << 0.5 * delta, 0.05 * x, 0.05 * x, -0.5 * delta;
      dia.push_back(m);
    }
    const AdiabaticModel model = build_model(g, mass, 1.0, std::move(dia));
    const NuclearState s = {gaussian_state(g, {0.0}, {6.0}, {0.5}), 0};
    return bo_error_transitions(model, s).eps;
  };
  const double e1 = eps_for(4.0);
  const double e2 = eps_for(8.0);
  CHECK(e2 < e1);
  CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.10));
}

TEST_CASE("full-space diagnostics reproduce the reduced error") {
  const AdiabaticModel model = crossing_model(256);
  const NuclearState s = packet(model, -1.0, 10.0, 0.5);
  const double ef = bo_error_fluctuation(model, s);

  const HamiltonianSpec full_h = full_space_hamiltonian(model);
  const WaveState psi = embed_full_space(model, s);
  CHECK(std::abs(norm(psi) - 1.0) < 1e-9);
  const ErrorReport rep = local_error(full_h, normalized(psi),
                                      bo_derivative_full_space(model, s));
  CHECK(std::abs(rep.eps - ef) < 1e-6 * std::max(ef, rep.eps));
  CHECK(rep.stationarity_ok);
}

TEST_CASE("surface propagation conserves norm and energy, bound holds vs oracle") {
  const AdiabaticModel model = crossing_model(256);
  const NuclearState s0 = packet(model, -4.0, 15.0, 0.45);
  BoRun run = propagate_bo(model, s0, 250.0, 41);

  const Eigen::MatrixXcd hn = bo_hamiltonian(model, 0);
  const double dx = model.grid->cell_volume();
  const double e0 = std::real(run.states[0].psi.amp().dot(hn * run.states[0].psi.amp())) * dx;
  for (std::size_t i = 0; i < run.times.size(); ++i) {
    CHECK(std::abs(norm(run.states[i].psi) - 1.0) < 1e-9);
    const double e = std::real(run.states[i].psi.amp().dot(hn * run.states[i].psi.amp())) * dx;
    CHECK(std::abs(e - e0) < 1e-8 * std::max(1.0, std::abs(e0)));
    CHECK(std::abs(run.eps_fluct[i] - run.eps_trans[i]) <
          1e-6 * std::max(run.eps_fluct[i], run.eps_trans[i]) + 1e-12);
  }

  // The Born-Oppenheimer run is variational, so the accumulated bound caps
  // the full-space distance to the exact solution.
  const HamiltonianSpec full_h = full_space_hamiltonian(model);
  Trajectory oracle = propagate_exact(full_h, normalized(embed_full_space(model, s0)),
                                      250.0, 41);
  for (std::size_t i = 0; i < run.times.size(); ++i) {
    const double d = distance(embed_full_space(model, run.states[i]), oracle.states[i]);
    CHECK(d <= run.reports[i].bound_accum * (1.0 + 1e-6) + 1e-12);
  }
}

TEST_CASE("three-state model keeps the per-transition split consistent") {
  auto g = Grid::make_1d(-6.0, 6.0, 256);
  const AdiabaticModel model = build_model(g, 800.0, 1.0,
                                           three_state_vibronic(*g, 4.0, 0.4, 0.3));
  const NuclearState s = {gaussian_state(g, {0.5}, {5.0}, {0.5}), 1};
  const double ef = bo_error_fluctuation(model, s);
  const TransitionError te = bo_error_transitions(model, s);
  REQUIRE(te.per_m.size() == 2);
  CHECK(te.eps == doctest::Approx(std::sqrt(te.per_m[0] + te.per_m[1])).epsilon(1e-12));
  CHECK(std::abs(ef - te.eps) < 1e-6 * std::max(ef, te.eps));
}

TEST_CASE("tabulated diabatic CSV models build") {
  const std::string path = "dia_tmp.csv";
  {
    std::ofstream out(path);
    out << "x,V11,V12,V22\n";
    char row[160];
    for (int i = 0; i < 64; ++i) {
      const double x = -5.0 + 10.0 * i / 63.0;
      std::snprintf(row, sizeof(row), "%.17g,%.17g,%.17g,%.17g\n", x, 0.3 * std::tanh(x),
                    0.05 * std::exp(-x * x), -0.3 * std::tanh(x));
      out << row;
    }
  }
  const PotentialTable table = load_potential_csv(path);
  auto g = Grid::make_1d(-5.0, 5.0, 64);
  std::vector<Eigen::MatrixXd> dia;
  for (const auto& m : table.diabatic) dia.push_back(m.real());
  const AdiabaticModel model = build_model(g, 100.0, 1.0, std::move(dia));
  CHECK(model.n_el == 2);
  CHECK(model.energies(0, 0) < model.energies(0, 1));
  std::remove(path.c_str());
}

#include "vqd/adiabatic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace vqd::adia {

namespace {

// Dense matrix of a 1D operator from its action on basis vectors.
template <typename Op>
Eigen::MatrixXcd dense_from_action(const Grid& grid, double hbar, Op&& op) {
  const auto n = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXcd m(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n);
    e[j] = cdouble(1.0, 0.0);
    m.col(j) = op(e);
  }
  (void)hbar;
  return m;
}

void fd_frame_derivatives(AdiabaticModel& model) {
  const Grid& g = *model.grid;
  const auto np = static_cast<Eigen::Index>(g.size());
  const double dx = g.dx(0);
  const bool periodic = g.boundary() == Boundary::periodic;
  const int nel = model.n_el;

  auto frame_col = [&](long p, int m) -> Eigen::VectorXd {
    long pp = p;
    if (periodic) {
      pp = ((p % np) + np) % np;
    } else {
      pp = std::max<long>(0, std::min<long>(np - 1, p));
    }
    return model.frames[static_cast<std::size_t>(pp)].col(m);
  };

  model.d1.assign(static_cast<std::size_t>(nel * nel), Eigen::VectorXd::Zero(np));
  model.d2.assign(static_cast<std::size_t>(nel * nel), Eigen::VectorXd::Zero(np));
  // 6th-order centered stencils at step dx; the formula-equivalence and
  // halved-step checks sit at 1e-6 and need the frame derivatives converged
  // well below that on a few-hundred-point grid.
  static const double c1[3] = {3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0};
  static const double c2_0 = -49.0 / 18.0;
  static const double c2[3] = {3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0};
  for (long p = 0; p < np; ++p) {
    for (int m = 0; m < nel; ++m) {
      Eigen::VectorXd dcol, d2col;
      if (periodic || (p >= 3 && p + 3 < np)) {
        dcol = Eigen::VectorXd::Zero(nel);
        d2col = c2_0 * frame_col(p, m);
        for (long k = 1; k <= 3; ++k) {
          dcol += c1[k - 1] * (frame_col(p + k, m) - frame_col(p - k, m));
          d2col += c2[k - 1] * (frame_col(p + k, m) + frame_col(p - k, m));
        }
        dcol /= dx;
        d2col /= dx * dx;
      } else if (p <= 2) {
        dcol = (-3.0 * frame_col(p, m) + 4.0 * frame_col(p + 1, m) - frame_col(p + 2, m)) /
               (2.0 * dx);
        d2col = (frame_col(p, m) - 2.0 * frame_col(p + 1, m) + frame_col(p + 2, m)) / (dx * dx);
      } else {
        dcol = (3.0 * frame_col(p, m) - 4.0 * frame_col(p - 1, m) + frame_col(p - 2, m)) /
               (2.0 * dx);
        d2col = (frame_col(p, m) - 2.0 * frame_col(p - 1, m) + frame_col(p - 2, m)) / (dx * dx);
      }
      for (int n = 0; n < nel; ++n) {
        const Eigen::VectorXd bra = frame_col(p, n);
        model.d1[static_cast<std::size_t>(n * nel + m)][p] = bra.dot(dcol);
        model.d2[static_cast<std::size_t>(n * nel + m)][p] = bra.dot(d2col);
      }
    }
  }
}

}  // namespace

AdiabaticModel build_model(std::shared_ptr<const Grid> grid, double mass, double hbar,
                           std::vector<Eigen::MatrixXd> diabatic, KineticScheme kinetic) {
  if (grid->ndim() != 1) throw StructuralError("adiabatic models use a 1D nuclear grid");
  if (diabatic.size() != grid->size()) {
    throw StructuralError("diabatic table size does not match grid");
  }
  AdiabaticModel model;
  model.grid = std::move(grid);
  model.mass = mass;
  model.hbar = hbar;
  model.kinetic = kinetic;
  model.n_el = static_cast<int>(diabatic.front().rows());
  if (model.n_el < 2 || model.n_el > 3) {
    throw StructuralError("adiabatic models support 2 or 3 electronic states");
  }
  model.dia = std::move(diabatic);

  const auto np = static_cast<Eigen::Index>(model.grid->size());
  model.energies.resize(np, model.n_el);
  model.frames.resize(static_cast<std::size_t>(np));
  for (Eigen::Index p = 0; p < np; ++p) {
    const Eigen::MatrixXd& m = model.dia[static_cast<std::size_t>(p)];
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + m.cwiseAbs().maxCoeff())) {
      throw StructuralError("diabatic matrices must be real symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) throw NumericalError("electronic eigensolve failed");
    model.energies.row(p) = es.eigenvalues().transpose();
    Eigen::MatrixXd f = es.eigenvectors();
    if (p == 0) {
      // Deterministic start: largest component of each column positive.
      for (int c = 0; c < model.n_el; ++c) {
        Eigen::Index imax;
        f.col(c).cwiseAbs().maxCoeff(&imax);
        if (f(imax, c) < 0.0) f.col(c) *= -1.0;
      }
    } else {
      // Continuity: maximize the real overlap with the previous frame.
      const Eigen::MatrixXd& prev = model.frames[static_cast<std::size_t>(p - 1)];
      for (int c = 0; c < model.n_el; ++c) {
        if (prev.col(c).dot(f.col(c)) < 0.0) f.col(c) *= -1.0;
      }
    }
    model.frames[static_cast<std::size_t>(p)] = f;
  }

  fd_frame_derivatives(model);
  return model;
}

std::vector<Eigen::MatrixXd> avoided_crossing_tanh(const Grid& grid, double amplitude,
                                                   double width, double gap,
                                                   double coupling_width) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(grid.size());
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const double x = grid.coordinate(p, 0);
    Eigen::MatrixXd m(2, 2);
    const double d = amplitude * std::tanh(x / width);
    const double c = 0.5 * gap * std::exp(-x * x / (2.0 * coupling_width * coupling_width));
    m << d, c, c, -d;
    out.push_back(m);
  }
  return out;
}

std::vector<Eigen::MatrixXd> linear_vibronic(const Grid& grid, double delta, double kappa1,
                                             double kappa2, double coupling) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(grid.size());
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const double x = grid.coordinate(p, 0);
    Eigen::MatrixXd m(2, 2);
    m << 0.5 * delta + kappa1 * x, coupling, coupling, -0.5 * delta + kappa2 * x;
    out.push_back(m);
  }
  return out;
}

std::vector<Eigen::MatrixXd> three_state_vibronic(const Grid& grid, double delta, double kappa,
                                                  double coupling) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(grid.size());
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const double x = grid.coordinate(p, 0);
    Eigen::MatrixXd m(3, 3);
    m << -delta + kappa * x, coupling, 0.0,
         coupling, 0.0, coupling,
         0.0, coupling, delta - kappa * x;
    out.push_back(m);
  }
  return out;
}

Eigen::MatrixXcd reduced_kinetic(const AdiabaticModel& model, int n, int m) {
  const Grid& g = *model.grid;
  const auto np = static_cast<Eigen::Index>(g.size());
  const HamiltonianSpec kin_spec(model.grid, {model.mass},
                                 Eigen::VectorXd::Zero(np), model.kinetic);
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(np, np);
  if (n == m) {
    out = dense_from_action(g, model.hbar, [&](const Eigen::VectorXcd& e) {
      WaveState s(model.grid, e, model.hbar, 1);
      return apply_kinetic(kin_spec, s).amp();
    });
  }
  // -(i hbar / M) d1_nm(X) P, assembled in the symmetrized-product form
  //   -(i hbar / 2M)(d1 P + P d1) + (hbar^2 / 2M) d1'
  // which is the same operator but pairs entry-wise with its adjoint under
  // d1_mn = -d1_nm (a diag(d1) D product alone has an exactly zero diagonal
  // and can never match the scalar terms of its partner matrix).
  const Eigen::MatrixXcd deriv = dense_from_action(g, model.hbar, [&](const Eigen::VectorXcd& e) {
    WaveState s(model.grid, e, model.hbar, 1);
    return derivative(s, 0, model.kinetic).amp();
  });
  const double c1 = -model.hbar * model.hbar / (2.0 * model.mass);
  const Eigen::MatrixXcd d1_diag =
      Eigen::MatrixXcd((c1 * model.coupling1(n, m)).cast<cdouble>().asDiagonal());
  out += d1_diag * deriv + deriv * d1_diag;
  const double c2 = -model.hbar * model.hbar / (2.0 * model.mass);
  const Eigen::VectorXd d1_prime = table_derivative(g, model.coupling1(n, m), 0);
  out += (c2 * (model.coupling2(n, m) - d1_prime)).cast<cdouble>().asDiagonal();
  return out;
}

Eigen::MatrixXcd bo_hamiltonian(const AdiabaticModel& model, int n) {
  Eigen::MatrixXcd h = reduced_kinetic(model, n, n);
  h += model.energies.col(n).cast<cdouble>().asDiagonal();
  return h;
}

double bo_error_fluctuation(const AdiabaticModel& model, const NuclearState& s) {
  if (s.psi.grid() != *model.grid) throw StructuralError("state grid mismatch");
  const double dx = model.grid->cell_volume();
  // <T^2>_nn - <T>_nn^2 via the off-diagonal completeness identity.
  Eigen::MatrixXcd op = Eigen::MatrixXcd::Zero(s.psi.amp().size(), s.psi.amp().size());
  for (int m = 0; m < model.n_el; ++m) {
    if (m == s.surface) continue;
    op += reduced_kinetic(model, s.surface, m) * reduced_kinetic(model, m, s.surface);
  }
  const cdouble expect = s.psi.amp().dot(op * s.psi.amp()) * dx;
  const double val = std::max(std::real(expect), 0.0);
  return std::sqrt(val) / model.hbar;
}

Eigen::VectorXd force_matrix_element(const AdiabaticModel& model, int m, int n) {
  const Grid& g = *model.grid;
  const auto np = static_cast<Eigen::Index>(g.size());
  const int nel = model.n_el;
  // Differentiate every diabatic entry along X, then sandwich the frames.
  std::vector<Eigen::VectorXd> dentry(static_cast<std::size_t>(nel * nel));
  for (int a = 0; a < nel; ++a) {
    for (int b = 0; b < nel; ++b) {
      Eigen::VectorXd col(np);
      for (Eigen::Index p = 0; p < np; ++p) col[p] = model.dia[static_cast<std::size_t>(p)](a, b);
      dentry[static_cast<std::size_t>(a * nel + b)] = table_derivative(g, col, 0);
    }
  }
  Eigen::VectorXd f(np);
  for (Eigen::Index p = 0; p < np; ++p) {
    Eigen::MatrixXd dh(nel, nel);
    for (int a = 0; a < nel; ++a) {
      for (int b = 0; b < nel; ++b) dh(a, b) = dentry[static_cast<std::size_t>(a * nel + b)][p];
    }
    const auto& fr = model.frames[static_cast<std::size_t>(p)];
    f[p] = -fr.col(m).dot(dh * fr.col(n));
  }
  return f;
}

TransitionError bo_error_transitions(const AdiabaticModel& model, const NuclearState& s,
                                     double degeneracy_floor) {
  if (s.psi.grid() != *model.grid) throw StructuralError("state grid mismatch");
  const Grid& g = *model.grid;
  const auto np = static_cast<Eigen::Index>(g.size());
  const int n = s.surface;
  const double hbar = model.hbar;

  // Degeneracy check on the support of psi.
  for (int m = 0; m < model.n_el; ++m) {
    if (m == n) continue;
    for (Eigen::Index p = 0; p < np; ++p) {
      if (std::norm(s.psi.amp()[p]) <= 1e-12) continue;
      const double gap = std::abs(model.energies(p, m) - model.energies(p, n));
      if (gap < degeneracy_floor) {
        std::ostringstream os;
        os << "surfaces " << n << " and " << m << " nearly degenerate at X = "
           << g.coordinate(static_cast<std::size_t>(p), 0) << " (gap " << gap << ")";
        throw StructuralError(os.str());
      }
    }
  }

  const WaveState dpsi = derivative(s.psi, 0, model.kinetic);
  TransitionError out;
  double total = 0.0;
  for (int m = 0; m < model.n_el; ++m) {
    if (m == n) continue;
    const Eigen::VectorXd f_mn = force_matrix_element(model, m, n);
    const Eigen::VectorXd& b_mn = model.coupling2(m, n);
    Eigen::VectorXcd phi(np);
    const double c = -hbar * hbar / (2.0 * model.mass);
    for (Eigen::Index p = 0; p < np; ++p) {
      const double de = model.energies(p, m) - model.energies(p, n);
      phi[p] = c * (2.0 * (f_mn[p] / de) * dpsi.amp()[p] + b_mn[p] * s.psi.amp()[p]);
    }
    const double contrib = phi.squaredNorm() * g.cell_volume() / (hbar * hbar);
    out.per_m.push_back(contrib);
    total += contrib;
  }
  out.eps = std::sqrt(total);
  return out;
}

WaveState embed_full_space(const AdiabaticModel& model, const NuclearState& s) {
  const auto np = static_cast<Eigen::Index>(model.grid->size());
  Eigen::VectorXcd amp(np * model.n_el);
  for (int e = 0; e < model.n_el; ++e) {
    for (Eigen::Index p = 0; p < np; ++p) {
      amp[e * np + p] =
          s.psi.amp()[p] * model.frames[static_cast<std::size_t>(p)](e, s.surface);
    }
  }
  return WaveState(model.grid, std::move(amp), model.hbar, model.n_el);
}

HamiltonianSpec full_space_hamiltonian(const AdiabaticModel& model) {
  std::vector<Eigen::MatrixXcd> dia;
  dia.reserve(model.dia.size());
  for (const auto& m : model.dia) dia.push_back(m.cast<cdouble>());
  return HamiltonianSpec(model.grid, {model.mass}, std::move(dia), model.kinetic);
}

WaveState bo_derivative_full_space(const AdiabaticModel& model, const NuclearState& s) {
  const Eigen::MatrixXcd h_n = bo_hamiltonian(model, s.surface);
  const Eigen::VectorXcd psidot =
      cdouble(0.0, -1.0 / model.hbar) * (h_n * s.psi.amp());
  NuclearState sd{WaveState(model.grid, psidot, model.hbar, 1), s.surface};
  return embed_full_space(model, sd);
}

BoRun propagate_bo(const AdiabaticModel& model, NuclearState s0, double t_final,
                   int n_samples) {
  if (!(t_final > 0.0)) throw StructuralError("t_final must be positive");
  if (n_samples < 2) throw StructuralError("need at least 2 samples");
  if (std::abs(norm(s0.psi) - 1.0) > 1e-8) {
    throw StructuralError("nuclear state must be normalized");
  }
  const DensePropagator prop(bo_hamiltonian(model, s0.surface), model.hbar);
  const HamiltonianSpec full_h = full_space_hamiltonian(model);

  // The reduced operators and coupling tables do not depend on time; build
  // them once and reuse across samples.
  const int n = s0.surface;
  const auto np = static_cast<Eigen::Index>(model.grid->size());
  Eigen::MatrixXcd fluct_op = Eigen::MatrixXcd::Zero(np, np);
  std::vector<Eigen::VectorXd> f_tables, b_tables;
  std::vector<Eigen::VectorXd> de_tables;
  for (int m = 0; m < model.n_el; ++m) {
    if (m == n) continue;
    fluct_op += reduced_kinetic(model, n, m) * reduced_kinetic(model, m, n);
    f_tables.push_back(force_matrix_element(model, m, n));
    b_tables.push_back(model.coupling2(m, n));
    Eigen::VectorXd de(np);
    for (Eigen::Index p = 0; p < np; ++p) de[p] = model.energies(p, m) - model.energies(p, n);
    de_tables.push_back(de);
  }
  const Eigen::MatrixXcd h_n = bo_hamiltonian(model, n);
  const double dx = model.grid->cell_volume();
  const double hbar = model.hbar;

  BoRun run;
  for (int i = 0; i < n_samples; ++i) {
    const double t = t_final * i / (n_samples - 1);
    NuclearState s{WaveState(model.grid, prop.evolve(s0.psi.amp(), t), model.hbar, 1),
                   s0.surface};
    const double fluct = std::real(s.psi.amp().dot(fluct_op * s.psi.amp())) * dx;
    const double eps_f = std::sqrt(std::max(fluct, 0.0)) / hbar;

    const WaveState dpsi = derivative(s.psi, 0, model.kinetic);
    std::vector<double> per_m;
    double total = 0.0;
    const double cf = -hbar * hbar / (2.0 * model.mass);
    for (std::size_t k = 0; k < f_tables.size(); ++k) {
      Eigen::VectorXcd phi(np);
      for (Eigen::Index p = 0; p < np; ++p) {
        phi[p] = cf * (2.0 * (f_tables[k][p] / de_tables[k][p]) * dpsi.amp()[p] +
                       b_tables[k][p] * s.psi.amp()[p]);
      }
      const double contrib = phi.squaredNorm() * dx / (hbar * hbar);
      per_m.push_back(contrib);
      total += contrib;
    }

    // Full-space diagnostics with the cached surface Hamiltonian.
    const WaveState psi_full = normalized(embed_full_space(model, s));
    const Eigen::VectorXcd psidot = cdouble(0.0, -1.0 / hbar) * (h_n * s.psi.amp());
    NuclearState sd{WaveState(model.grid, psidot, hbar, 1), n};
    ErrorReport rep = local_error(full_h, psi_full, embed_full_space(model, sd));
    rep.t = t;

    run.times.push_back(t);
    run.states.push_back(std::move(s));
    run.eps_fluct.push_back(eps_f);
    run.eps_trans.push_back(std::sqrt(total));
    run.per_transition.push_back(per_m);
    run.reports.push_back(rep);
  }
  accumulate_bound(run.reports);
  return run;
}

void write_transitions_csv(const BoRun& run, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw StructuralError("cannot write transitions CSV: " + path);
  out << "t,eps_fluct,eps_trans";
  if (!run.per_transition.empty()) {
    for (std::size_t m = 0; m < run.per_transition.front().size(); ++m) {
      out << ",trans_" << m;
    }
  }
  out << "\n";
  char buf[64];
  for (std::size_t i = 0; i < run.times.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", run.times[i]);
    out << buf;
    std::snprintf(buf, sizeof(buf), ",%.17g", run.eps_fluct[i]);
    out << buf;
    std::snprintf(buf, sizeof(buf), ",%.17g", run.eps_trans[i]);
    out << buf;
    for (double v : run.per_transition[i]) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace vqd::adia

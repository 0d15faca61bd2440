#include "vqd/exact.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>

namespace vqd {

DensePropagator::DensePropagator(const Eigen::MatrixXcd& h, double hbar) : hbar_(hbar) {
  const double asym = (h - h.adjoint()).cwiseAbs().maxCoeff();
  if (asym > 1e-8 * (1.0 + h.cwiseAbs().maxCoeff())) {
    throw NumericalError("dense propagator needs a Hermitian matrix");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  if (es.info() != Eigen::Success) {
    throw NumericalError("dense eigendecomposition failed (size " +
                         std::to_string(h.rows()) + ")");
  }
  evals_ = es.eigenvalues();
  evecs_ = es.eigenvectors();
}

Eigen::VectorXcd DensePropagator::evolve(const Eigen::VectorXcd& v0, double t) const {
  Eigen::VectorXcd c = evecs_.adjoint() * v0;
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    c[i] *= std::exp(cdouble(0.0, -evals_[i] * t / hbar_));
  }
  return evecs_ * c;
}

WaveState krylov_step(const HamiltonianSpec& h, const WaveState& psi, double dt,
                      double tol, int max_krylov) {
  const double beta0 = norm(psi);
  if (!(beta0 > 0.0)) throw StructuralError("cannot propagate a zero state");
  const double hbar = psi.hbar();

  std::vector<WaveState> basis;
  basis.push_back(cdouble(1.0 / beta0, 0.0) * psi);
  std::vector<double> alpha, beta;

  Eigen::VectorXcd small_sol;
  double residual = 0.0;
  for (int m = 1; m <= max_krylov; ++m) {
    WaveState w = apply_h(h, basis.back());
    // Full reorthogonalization keeps the basis trustworthy at small sizes.
    const double a = std::real(inner(basis.back(), w));
    alpha.push_back(a);
    for (std::size_t k = 0; k < basis.size(); ++k) {
      w = w - (inner(basis[k], w) * basis[k]);
    }
    for (std::size_t k = 0; k < basis.size(); ++k) {
      w = w - (inner(basis[k], w) * basis[k]);
    }
    const double b = norm(w);

    Eigen::MatrixXd t_small = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) t_small(i, i) = alpha[static_cast<std::size_t>(i)];
    for (int i = 0; i + 1 < m; ++i) {
      t_small(i, i + 1) = beta[static_cast<std::size_t>(i)];
      t_small(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t_small);
    Eigen::VectorXcd e1 = Eigen::VectorXcd::Zero(m);
    e1[0] = cdouble(1.0, 0.0);
    Eigen::VectorXcd c = es.eigenvectors().transpose().cast<cdouble>() * e1;
    for (int i = 0; i < m; ++i) {
      c[i] *= std::exp(cdouble(0.0, -es.eigenvalues()[i] * dt / hbar));
    }
    small_sol = es.eigenvectors().cast<cdouble>() * c;
    residual = b * std::abs(small_sol[m - 1]) * std::abs(dt) / hbar;
    if (residual < tol || b < 1e-14) break;
    if (m == max_krylov) break;
    beta.push_back(b);
    basis.push_back(cdouble(1.0 / b, 0.0) * w);
  }

  if (residual >= tol) {
    // Substep recursively until the local residual estimate is in budget.
    WaveState half = krylov_step(h, psi, dt / 2.0, tol / 2.0, max_krylov);
    return krylov_step(h, half, dt / 2.0, tol / 2.0, max_krylov);
  }

  WaveState out = WaveState::zero(psi.grid_ptr(), psi.hbar(), psi.channels());
  for (std::size_t k = 0; k < basis.size(); ++k) {
    out = out + (cdouble(beta0, 0.0) * small_sol[static_cast<Eigen::Index>(k)]) * basis[k];
  }
  return out;
}

Trajectory propagate_exact(const HamiltonianSpec& h, const WaveState& psi0, double t_final,
                           int n_store, std::optional<PropagationMethod> force) {
  if (t_final < 0.0) throw StructuralError("t_final must be non-negative");
  if (n_store < 1) throw StructuralError("n_store must be at least 1");
  if (std::abs(norm(psi0) - 1.0) > 1e-8) {
    throw StructuralError("initial state must be normalized");
  }

  const Eigen::Index dim = static_cast<Eigen::Index>(psi0.grid().size()) * psi0.channels();
  PropagationMethod method =
      force.value_or(dim <= 2048 ? PropagationMethod::eigendecomposition
                                 : PropagationMethod::krylov);

  Trajectory traj;
  traj.method = method;
  const int n_times = t_final == 0.0 ? 1 : n_store;
  for (int i = 0; i < n_times; ++i) {
    traj.times.push_back(n_times == 1 ? 0.0 : t_final * i / (n_times - 1));
  }

  if (t_final == 0.0) {
    traj.states.push_back(psi0);
  } else if (method == PropagationMethod::eigendecomposition) {
    DensePropagator prop(dense_matrix(h, psi0.hbar()), psi0.hbar());
    for (double t : traj.times) {
      if (t == 0.0) {
        traj.states.push_back(psi0);
        continue;
      }
      traj.states.emplace_back(psi0.grid_ptr(), prop.evolve(psi0.amp(), t), psi0.hbar(),
                               psi0.channels());
    }
  } else {
    WaveState current = psi0;
    double t_now = 0.0;
    for (double t : traj.times) {
      if (t > t_now) {
        current = krylov_step(h, current, t - t_now);
        t_now = t;
      }
      traj.states.push_back(current);
    }
  }

  for (const WaveState& s : traj.states) {
    traj.norms.push_back(norm(s));
    const auto [e, var] = energy_moments(h, normalized(s));
    (void)var;
    traj.energies.push_back(e);
  }
  return traj;
}

std::pair<double, double> observable_error_bounds(double delta, double a_opnorm) {
  if (delta < 0.0 || a_opnorm < 0.0) {
    throw StructuralError("observable_error_bounds needs non-negative inputs");
  }
  return {delta, 2.0 * a_opnorm * delta};
}

void export_trajectory_csv(const Trajectory& traj, const std::string& path,
                           bool amplitudes_sidecar) {
  std::ofstream out(path);
  if (!out) throw StructuralError("cannot write trajectory CSV: " + path);
  out << "t,norm,energy\n";
  char buf[96];
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", traj.times[i], traj.norms[i],
                  traj.energies[i]);
    out << buf;
  }
  if (!amplitudes_sidecar) return;

  std::ofstream bin(path + ".amps.bin", std::ios::binary);
  if (!bin) throw StructuralError("cannot write amplitude sidecar for " + path);
  for (const WaveState& s : traj.states) {
    for (Eigen::Index j = 0; j < s.amp().size(); ++j) {
      const float re = static_cast<float>(std::real(s.amp()[j]));
      const float im = static_cast<float>(std::imag(s.amp()[j]));
      bin.write(reinterpret_cast<const char*>(&re), sizeof(float));
      bin.write(reinterpret_cast<const char*>(&im), sizeof(float));
    }
  }
}

}  // namespace vqd

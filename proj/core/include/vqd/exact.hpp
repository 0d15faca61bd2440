#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vqd/hamiltonian.hpp"

namespace vqd {

enum class PropagationMethod { eigendecomposition, krylov };

/// Reference solution of i hbar d/dt psi = H psi sampled at stored times.
struct Trajectory {
  std::vector<double> times;
  std::vector<WaveState> states;
  std::vector<double> norms;
  std::vector<double> energies;
  PropagationMethod method = PropagationMethod::eigendecomposition;
};

/// Evolves any Hermitian dense matrix by full diagonalization. Useful both
/// for the brute-force oracle and for effective one-mode Hamiltonians.
class DensePropagator {
 public:
  DensePropagator(const Eigen::MatrixXcd& h, double hbar);

  /// exp(-i H t / hbar) v
  Eigen::VectorXcd evolve(const Eigen::VectorXcd& v0, double t) const;
  const Eigen::VectorXd& eigenvalues() const noexcept { return evals_; }
  const Eigen::MatrixXcd& eigenvectors() const noexcept { return evecs_; }

 private:
  Eigen::VectorXd evals_;
  Eigen::MatrixXcd evecs_;
  double hbar_;
};

/// Single adaptive Lanczos step psi(t + dt); used when the dense spectral
/// path is too large. Residual per step is kept below `tol`.
WaveState krylov_step(const HamiltonianSpec& h, const WaveState& psi, double dt,
                      double tol = 1e-10, int max_krylov = 48);

/// Brute-force reference propagation, storing n_store states evenly spaced
/// over [0, t_final]. Grids up to 2048 points use the dense eigendecomposition
/// path; larger ones fall back to short-iterative Lanczos.
Trajectory propagate_exact(const HamiltonianSpec& h, const WaveState& psi0, double t_final,
                           int n_store, std::optional<PropagationMethod> force = std::nullopt);

/// (autocorrelation bound, bounded-observable bound) implied by a
/// wavefunction error delta = ||psi - psi_exact|| and an operator norm.
std::pair<double, double> observable_error_bounds(double delta, double a_opnorm);

/// Writes t, norm, energy rows; with `amplitudes_sidecar` also dumps all
/// stored amplitudes as little-endian complex64 (float32 re/im pairs) into
/// `path` + ".amps.bin", one state after another.
void export_trajectory_csv(const Trajectory& traj, const std::string& path,
                           bool amplitudes_sidecar = false);

}  // namespace vqd

#pragma once

#include "vqd/diagnostics.hpp"
#include "vqd/ode.hpp"
#include "vqd/tdh.hpp"

namespace vqd::mctdh {

using tdh::Coupling;
using tdh::TdhMode;

/// Two-mode system; shares the mode/coupling vocabulary with the Hartree
/// module.
struct MctdhSystem {
  std::vector<TdhMode> modes;  ///< exactly 2
  Coupling coupling = Coupling::none();
  double hbar = 1.0;
  KineticScheme kinetic = KineticScheme::spectral;
};

/// Multiconfiguration state: per-mode orthonormal single-particle functions
/// and the coefficient tensor (a matrix for two modes), unit Frobenius norm.
struct MCTDHState {
  std::vector<std::vector<Eigen::VectorXcd>> spfs;  ///< [mode][index], grid values
  Eigen::MatrixXcd coeff;                           ///< (n1, n2)

  int n_spfs(int mode) const { return static_cast<int>(spfs[static_cast<std::size_t>(mode)].size()); }
};

/// Orthonormalizes the raw per-mode functions (modified Gram-Schmidt in the
/// quadrature inner product) and normalizes the coefficients.
MCTDHState make_state(const MctdhSystem& sys,
                      std::vector<std::vector<Eigen::VectorXcd>> raw_spfs,
                      Eigen::MatrixXcd coeff);

tdh::TdhSystem as_tdh_system(const MctdhSystem& sys);
std::shared_ptr<const Grid> joint_grid(const MctdhSystem& sys);
HamiltonianSpec joint_hamiltonian(const MctdhSystem& sys);

WaveState reconstruct(const MctdhSystem& sys, const MCTDHState& s);

/// Minimum-distance tangent solve: minimizes ||i hbar u - H Psi|| over the
/// full parameter tangent space (coefficient and spf-value directions). The
/// tangent space is complex-linear, so the real-parameter least squares is
/// solved as a complex normal-equations system with Tikhonov damping against
/// the gauge redundancy of the parametrization.
struct TangentSolution {
  WaveState psidot;   ///< minimizer, gauge of the exact solution
  double eps = 0.0;   ///< ||i hbar psidot - H Psi|| / hbar
  Eigen::MatrixXcd cdot;                           ///< canonical gauge
  std::vector<std::vector<Eigen::VectorXcd>> spf_dots;  ///< <phi_i|phidot_j> = 0
  double condition = 0.0;
  double identity_defect = 0.0;  ///< residual of the stationarity identity, eps^2 units
};
/// `spectral_floor`, when positive, bounds the inverse normal-equation
/// spectrum at floor*smax when splitting the minimizer into parameter rates;
/// the propagation driver uses it to tame the near-singular rates of
/// freshly spawned, barely occupied configurations. The default (0) keeps
/// the exact minimizer.
TangentSolution tangent_lsq(const MctdhSystem& sys, const MCTDHState& s,
                            double spectral_floor = 0.0);

/// Rate operator for one mode: Gamma = sum_J |<Phi_J|H Psi>><<H Psi|Phi_J>|
/// contracted over the other mode; dense, Hermitian, PSD.
Eigen::MatrixXcd gamma_operator(const MctdhSystem& sys, const MCTDHState& s, int mode);

struct SpawnResult {
  struct PerMode {
    bool spawned = false;
    Eigen::VectorXcd eta;  ///< new spf, quadrature-normalized
    double gamma = 0.0;
    int residual_dim = 0;
  };
  std::vector<PerMode> modes;
  double eps_before = 0.0;
  double eps_after_predicted = 0.0;   ///< sqrt(eps^2 - sum gamma / hbar^2)
  double eps_after_restricted = 0.0;  ///< update restricted to new-config coefficients
  double eps_after_measured = 0.0;    ///< full tangent solve on the enlarged state
};

/// Picks the top eigenvector of the rate operator in the orthogonal
/// complement of the occupied spfs and their time-derivatives, per mode, and
/// verifies the predicted squared-error reduction against the restricted and
/// fully enlarged tangent solves.
SpawnResult spawn_select(const MctdhSystem& sys, const MCTDHState& s,
                         const TangentSolution& tsol);

/// State with the spawned spfs appended (zero coefficient rows/columns), so
/// the wavefunction itself is unchanged.
MCTDHState enlarged(const MCTDHState& s, const SpawnResult& spawn);
MCTDHState enlarged_with(const MCTDHState& s, int mode, const Eigen::VectorXcd& eta);

struct MctdhRun {
  std::vector<double> times;
  std::vector<MCTDHState> states;
  std::vector<ErrorReport> reports;
  std::vector<double> conditions;
};

/// Variational propagation of the full parameter set (coefficients and
/// spfs), stepping with the tangent solve as right-hand side.
MctdhRun propagate(const MctdhSystem& sys, MCTDHState s0, double t_final, int n_samples,
                   const OdeOptions& opts = {}, WarningLog* log = nullptr);

}  // namespace vqd::mctdh

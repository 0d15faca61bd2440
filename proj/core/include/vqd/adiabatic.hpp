#pragma once

#include "vqd/diagnostics.hpp"
#include "vqd/exact.hpp"

namespace vqd::adia {

/// Diabatic model diagonalized point-by-point on a 1D nuclear grid:
/// adiabatic energies, sign-fixed eigenvector frames, and the first/second
/// derivative couplings of the frames by centered finite differences.
struct AdiabaticModel {
  std::shared_ptr<const Grid> grid;  ///< nuclear coordinate
  double mass = 1.0;
  double hbar = 1.0;
  int n_el = 2;
  KineticScheme kinetic = KineticScheme::spectral;

  std::vector<Eigen::MatrixXd> dia;     ///< diabatic matrix per point
  Eigen::MatrixXd energies;             ///< (points, n_el)
  std::vector<Eigen::MatrixXd> frames;  ///< per point, columns = eigenvectors

  /// d1[n*n_el+m], d2[n*n_el+m]: <Phi_n|d Phi_m/dX> and the second
  /// derivative analogue, tabulated over the grid.
  std::vector<Eigen::VectorXd> d1;
  std::vector<Eigen::VectorXd> d2;

  const Eigen::VectorXd& coupling1(int n, int m) const {
    return d1[static_cast<std::size_t>(n * n_el + m)];
  }
  const Eigen::VectorXd& coupling2(int n, int m) const {
    return d2[static_cast<std::size_t>(n * n_el + m)];
  }
};

AdiabaticModel build_model(std::shared_ptr<const Grid> grid, double mass, double hbar,
                           std::vector<Eigen::MatrixXd> diabatic,
                           KineticScheme kinetic = KineticScheme::spectral);

/// Named analytic models, tabulated on the grid.
std::vector<Eigen::MatrixXd> avoided_crossing_tanh(const Grid& grid, double amplitude,
                                                   double width, double gap,
                                                   double coupling_width);
std::vector<Eigen::MatrixXd> linear_vibronic(const Grid& grid, double delta, double kappa1,
                                             double kappa2, double coupling);
std::vector<Eigen::MatrixXd> three_state_vibronic(const Grid& grid, double delta,
                                                  double kappa, double coupling);

struct NuclearState {
  WaveState psi;
  int surface = 0;
};

/// Reduced kinetic operator <T>_nm as a dense matrix on the nuclear grid:
/// delta_nm T - (i hbar / M) d1_nm(X) P - (hbar^2 / 2M) d2_nm(X).
Eigen::MatrixXcd reduced_kinetic(const AdiabaticModel& model, int n, int m);

/// Single-surface Hamiltonian H_n = <T>_nn + E_n(X), dense and Hermitian.
Eigen::MatrixXcd bo_hamiltonian(const AdiabaticModel& model, int n);

/// Kinetic-energy-fluctuation form of the local error: the expectation of
/// <T^2>_nn - <T>_nn^2 assembled as sum_{m != n} <T>_nm <T>_mn.
double bo_error_fluctuation(const AdiabaticModel& model, const NuclearState& s);

/// Electronic-transition form: amplitudes built from Hellmann-Feynman force
/// matrix elements and the second-derivative couplings applied to psi.
struct TransitionError {
  double eps = 0.0;
  std::vector<double> per_m;  ///< one contribution per m != n, ascending m
};
TransitionError bo_error_transitions(const AdiabaticModel& model, const NuclearState& s,
                                     double degeneracy_floor = 1e-6);

/// Force matrix element -<Phi_m| d h_el/dX |Phi_n> by Hellmann-Feynman,
/// tabulated over the grid (the diabatic matrix is differentiated).
Eigen::VectorXd force_matrix_element(const AdiabaticModel& model, int m, int n);

/// Full-space embedding psi(X) Phi_n(X) as an n_el-channel state.
WaveState embed_full_space(const AdiabaticModel& model, const NuclearState& s);

/// The diabatic Hamiltonian acting on n_el-channel states.
HamiltonianSpec full_space_hamiltonian(const AdiabaticModel& model);

/// The clamped-frame time derivative (-i/hbar)(H_n psi) Phi_n, embedded.
WaveState bo_derivative_full_space(const AdiabaticModel& model, const NuclearState& s);

struct BoRun {
  std::vector<double> times;
  std::vector<NuclearState> states;
  std::vector<ErrorReport> reports;  ///< full-space diagnostics
  std::vector<double> eps_fluct;
  std::vector<double> eps_trans;
  std::vector<std::vector<double>> per_transition;
};

/// Propagates the nuclear state under H_n (dense spectral stepping) and
/// evaluates both error forms plus the full-space diagnostics per sample.
BoRun propagate_bo(const AdiabaticModel& model, NuclearState s0, double t_final,
                   int n_samples);

void write_transitions_csv(const BoRun& run, const std::string& path);

}  // namespace vqd::adia

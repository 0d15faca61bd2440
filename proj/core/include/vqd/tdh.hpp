#pragma once

#include "vqd/diagnostics.hpp"
#include "vqd/ode.hpp"

namespace vqd::tdh {

/// One distinguishable mode: its own 1D grid, mass, and one-body potential.
struct TdhMode {
  std::shared_ptr<const Grid> grid;
  double mass = 1.0;
  Eigen::VectorXd potential;  ///< one-body part, tabulated on `grid`
};

/// Interaction beyond the one-body parts: a sum of bilinear terms
/// c * x_a * x_b, or a tabulated residual on the joint grid (2 modes only).
class Coupling {
 public:
  struct Bilinear {
    int a = 0;
    int b = 1;
    double c = 0.0;
  };

  static Coupling none();
  static Coupling bilinear(double c, int a = 0, int b = 1);
  static Coupling bilinear_terms(std::vector<Bilinear> terms);
  static Coupling tabulated(Eigen::MatrixXd w);  ///< w(i1, i2) over mode grids

  bool is_tabulated() const noexcept { return tabulated_.size() > 0; }
  const std::vector<Bilinear>& terms() const noexcept { return terms_; }
  const Eigen::MatrixXd& table() const noexcept { return tabulated_; }

 private:
  std::vector<Bilinear> terms_;
  Eigen::MatrixXd tabulated_;
};

struct TdhSystem {
  std::vector<TdhMode> modes;
  Coupling coupling = Coupling::none();
  double hbar = 1.0;
  KineticScheme kinetic = KineticScheme::spectral;
};

/// Product ansatz: one normalized single-particle function per mode, the
/// per-mode gauge energies g_i (zero here, their sum must vanish), and the
/// accumulated global phase that keeps the joint state in the gauge of the
/// exact solution.
struct TDHState {
  std::vector<WaveState> spfs;
  std::vector<double> gauges;
  double phase = 0.0;
};

TDHState make_state(const TdhSystem& sys, std::vector<WaveState> spfs);

std::shared_ptr<const Grid> joint_grid(const TdhSystem& sys);
HamiltonianSpec joint_hamiltonian(const TdhSystem& sys);

/// Coupling table on the joint grid.
Eigen::VectorXd coupling_table(const TdhSystem& sys);

/// Mean-field potential of the coupling on mode i, <Psi^i| W |Psi^i>.
Eigen::VectorXd mean_field_potential(const TdhSystem& sys, const TDHState& s, int mode);

/// Dense mean-field Hamiltonian H_i = h_i + sum_{j != i} eps_j + v_i.
Eigen::MatrixXcd mean_field_h(const TdhSystem& sys, const TDHState& s, int mode);

/// <Psi|H|Psi> evaluated from the per-mode pieces (no joint grid needed).
double mean_energy(const TdhSystem& sys, const TDHState& s);

/// i hbar d/dt phi_i = (H_i + g_i - E) phi_i; returns one derivative per
/// mode plus the global phase rate -E/hbar.
struct TdhRates {
  std::vector<WaveState> spf_dots;
  double phase_dot = 0.0;
};
TdhRates tdh_rhs(const TdhSystem& sys, const TDHState& s);

/// Tensor-product reconstruction e^{i phase} prod_i phi_i on the joint grid.
WaveState hartree_to_grid(const TdhSystem& sys, const TDHState& s);

/// Joint-grid derivative of the reconstruction (exact gauge).
WaveState joint_derivative(const TdhSystem& sys, const TDHState& s);

/// Energy-variance split var_E = var_mf + var_dV + cross and the derived
/// correlation error and r-index bounds.
struct MeanFieldDecomposition {
  double e_bar = 0.0;
  double var_e = 0.0;
  double var_mf = 0.0;
  double var_dv = 0.0;
  double cross = 0.0;
  double eps_mf = 0.0;
  double r_mf = 1.0;
  double r_lower = 1.0;
  double dv_mean = 0.0;  ///< <Delta V>, zero by construction
  bool stationary = false;
};
MeanFieldDecomposition tdh_error(const TdhSystem& sys, const TDHState& s);

struct TdhRun {
  std::vector<double> times;
  std::vector<TDHState> states;
  std::vector<ErrorReport> reports;
  std::vector<MeanFieldDecomposition> decomps;
};

TdhRun propagate(const TdhSystem& sys, TDHState s0, double t_final, int n_samples,
                 const OdeOptions& opts = {}, WarningLog* log = nullptr);

void write_decomposition_csv(const std::vector<double>& times,
                             const std::vector<MeanFieldDecomposition>& decomps,
                             const std::string& path);

}  // namespace vqd::tdh

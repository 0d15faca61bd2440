#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vqd/grid.hpp"

namespace vqd {

enum class KineticScheme { spectral, finite_difference };

/// Kinetic masses plus a tabulated potential on the grid. The potential is
/// either a real scalar per point or a Hermitian n_el x n_el matrix per point
/// (diabatic variant); the latter acts on multi-channel states.
class HamiltonianSpec {
 public:
  HamiltonianSpec(std::shared_ptr<const Grid> grid, std::vector<double> masses,
                  Eigen::VectorXd potential,
                  KineticScheme kinetic = KineticScheme::spectral);

  HamiltonianSpec(std::shared_ptr<const Grid> grid, std::vector<double> masses,
                  std::vector<Eigen::MatrixXcd> diabatic,
                  KineticScheme kinetic = KineticScheme::spectral);

  const Grid& grid() const noexcept { return *grid_; }
  const std::shared_ptr<const Grid>& grid_ptr() const noexcept { return grid_; }
  double mass(int axis) const { return masses_.at(static_cast<std::size_t>(axis)); }
  const std::vector<double>& masses() const noexcept { return masses_; }
  KineticScheme kinetic() const noexcept { return kinetic_; }
  int n_channels() const noexcept { return n_el_; }
  bool diabatic() const noexcept { return n_el_ > 1; }

  const Eigen::VectorXd& potential() const;
  const Eigen::MatrixXcd& diabatic_matrix(std::size_t point) const;

  /// H - eps (constant shift of the potential).
  HamiltonianSpec shifted(double eps) const;

 private:
  std::shared_ptr<const Grid> grid_;
  std::vector<double> masses_;
  KineticScheme kinetic_;
  int n_el_ = 1;
  Eigen::VectorXd v_;
  std::vector<Eigen::MatrixXcd> dia_;
};

/// H|psi>. For boxed grids the state is expected to be decayed at the edges;
/// a violation is recorded in `warnings` (when given) but is not fatal.
WaveState apply_h(const HamiltonianSpec& h, const WaveState& psi,
                  WarningLog* warnings = nullptr);

/// Kinetic part only.
WaveState apply_kinetic(const HamiltonianSpec& h, const WaveState& psi);

/// (E_bar, var_E) with E_bar = <psi|H|psi> and var_E = ||(H - E_bar)psi||^2.
/// Requires |norm(psi) - 1| < 1e-8.
std::pair<double, double> energy_moments(const HamiltonianSpec& h, const WaveState& psi);

/// d/dx_axis. Spectral uses the Fourier derivative (Nyquist mode dropped),
/// finite_difference the centered 4th-order stencil.
WaveState derivative(const WaveState& psi, int axis, KineticScheme scheme);

/// -i hbar d/dx_axis.
WaveState apply_momentum(const WaveState& psi, int axis, KineticScheme scheme);

/// (x_axis - shift) psi.
WaveState multiply_coordinate(const WaveState& psi, int axis, double shift = 0.0);

/// Pointwise multiplication by a real function tabulated on the grid,
/// applied to every channel.
WaveState multiply_function(const WaveState& psi, const Eigen::VectorXd& f);

/// Dense matrix of H (size grid.size * n_channels) built by applying H to
/// basis vectors. Meant for desk-scale grids.
Eigen::MatrixXcd dense_matrix(const HamiltonianSpec& h, double hbar);

/// 4th-order centered finite-difference derivative of a tabulated function
/// (one-sided 2nd-order at boxed edges, wrap-around when periodic).
Eigen::VectorXd table_derivative(const Grid& grid, const Eigen::VectorXd& f, int axis);

/// Largest |amplitude| on the boundary faces relative to the global max.
double edge_amplitude_ratio(const WaveState& psi);

/// A potential table read from CSV. Columns are x[,y] followed by either V
/// or the upper triangle V11,V12,V22 of a two-state diabatic matrix.
struct PotentialTable {
  std::vector<AxisSpec> axes;
  Eigen::VectorXd scalar;                  // empty when diabatic
  std::vector<Eigen::MatrixXcd> diabatic;  // empty when scalar
  int n_el = 1;
};

PotentialTable load_potential_csv(const std::string& path);

/// Validates that the table matches `grid` point-for-point (1e-9 tolerance
/// on coordinates) and returns a HamiltonianSpec over it.
HamiltonianSpec hamiltonian_from_table(std::shared_ptr<const Grid> grid,
                                       std::vector<double> masses,
                                       const PotentialTable& table,
                                       KineticScheme kinetic = KineticScheme::spectral);

}  // namespace vqd

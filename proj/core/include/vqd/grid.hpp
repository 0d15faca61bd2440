#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <memory>
#include <vector>

#include "vqd/errors.hpp"

namespace vqd {

using cdouble = std::complex<double>;

enum class Boundary { periodic, boxed };

struct AxisSpec {
  double x_min = 0.0;
  double x_max = 0.0;
  int n_points = 0;
};

/// Uniform tensor-product grid, 1 to 3 dimensions.
///
/// Periodic axes sample [x_min, x_max) with dx = L/n; boxed axes sample the
/// closed interval [x_min, x_max] with dx = L/(n-1). Quadrature is uniform
/// with weight dx^d, which is trapezoid-accurate for states that are periodic
/// or decayed at the box edges. Flat indexing is row-major with axis 0
/// slowest.
class Grid {
 public:
  static constexpr std::size_t default_point_cap = std::size_t{1} << 20;

  Grid(std::vector<AxisSpec> axes, Boundary boundary,
       std::size_t point_cap = default_point_cap);

  static std::shared_ptr<const Grid> make_1d(double x_min, double x_max, int n,
                                             Boundary boundary = Boundary::boxed);
  static std::shared_ptr<const Grid> make(std::vector<AxisSpec> axes,
                                          Boundary boundary = Boundary::boxed);

  int ndim() const noexcept { return static_cast<int>(axes_.size()); }
  int n_points(int axis) const { return specs_.at(axis).n_points; }
  double dx(int axis) const { return dx_.at(axis); }
  double x_min(int axis) const { return specs_.at(axis).x_min; }
  double x_max(int axis) const { return specs_.at(axis).x_max; }
  const std::vector<double>& axis(int d) const { return axes_.at(d); }
  Boundary boundary() const noexcept { return boundary_; }

  std::size_t size() const noexcept { return size_; }
  double cell_volume() const noexcept { return cell_volume_; }
  std::size_t stride(int axis) const { return strides_.at(axis); }

  /// Coordinate along `axis` of the point with flat index `flat`.
  double coordinate(std::size_t flat, int axis) const {
    return axes_[axis][(flat / strides_[axis]) % axes_[axis].size()];
  }

  bool operator==(const Grid& other) const;
  bool operator!=(const Grid& other) const { return !(*this == other); }

 private:
  std::vector<AxisSpec> specs_;
  std::vector<std::vector<double>> axes_;
  std::vector<double> dx_;
  std::vector<std::size_t> strides_;
  Boundary boundary_;
  std::size_t size_ = 0;
  double cell_volume_ = 1.0;
};

/// Complex amplitudes on a grid, one entry per grid point per channel.
/// Channels model internal (e.g. electronic) degrees of freedom and are laid
/// out as contiguous blocks of grid.size() entries. The quadrature weight
/// dx^d is applied at inner-product time, not stored in the amplitudes.
class WaveState {
 public:
  WaveState(std::shared_ptr<const Grid> grid, Eigen::VectorXcd amplitudes,
            double hbar = 1.0, int channels = 1);

  static WaveState zero(std::shared_ptr<const Grid> grid, double hbar = 1.0,
                        int channels = 1);

  const Grid& grid() const noexcept { return *grid_; }
  const std::shared_ptr<const Grid>& grid_ptr() const noexcept { return grid_; }
  int channels() const noexcept { return channels_; }
  double hbar() const noexcept { return hbar_; }
  const Eigen::VectorXcd& amp() const noexcept { return amp_; }
  Eigen::VectorXcd& amp() noexcept { return amp_; }

  Eigen::VectorBlock<const Eigen::VectorXcd> channel(int c) const {
    return amp_.segment(static_cast<Eigen::Index>(c) * points(), points());
  }
  Eigen::VectorBlock<Eigen::VectorXcd> channel(int c) {
    return amp_.segment(static_cast<Eigen::Index>(c) * points(), points());
  }

  Eigen::Index points() const noexcept {
    return static_cast<Eigen::Index>(grid_->size());
  }

 private:
  std::shared_ptr<const Grid> grid_;
  int channels_;
  double hbar_;
  Eigen::VectorXcd amp_;
};

/// Throws StructuralError unless the two states live on the same grid with
/// the same channel count and hbar.
void require_compatible(const WaveState& a, const WaveState& b);

/// Quadrature inner product, conjugate-linear in the first argument.
cdouble inner(const WaveState& a, const WaveState& b);

double norm(const WaveState& a);
double norm_sq(const WaveState& a);
WaveState normalized(const WaveState& a);

/// L2 distance ||a - b|| in the quadrature norm.
double distance(const WaveState& a, const WaveState& b);

WaveState operator+(const WaveState& a, const WaveState& b);
WaveState operator-(const WaveState& a, const WaveState& b);
WaveState operator*(cdouble s, const WaveState& a);

/// Product of 1D Gaussians exp(-(x-c)^2/(4 w^2) + i p (x-c)/hbar) per axis,
/// normalized numerically on the grid. The general-purpose initial state for
/// scenarios and tests; the coherent-state module carries its own exact
/// phase convention.
WaveState gaussian_state(std::shared_ptr<const Grid> grid,
                         const std::vector<double>& centers,
                         const std::vector<double>& momenta,
                         const std::vector<double>& widths, double hbar = 1.0);

}  // namespace vqd

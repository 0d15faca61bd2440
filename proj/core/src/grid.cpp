#include "vqd/grid.hpp"

#include <cmath>
#include <sstream>

namespace vqd {

Grid::Grid(std::vector<AxisSpec> axes, Boundary boundary, std::size_t point_cap)
    : specs_(std::move(axes)), boundary_(boundary) {
  if (specs_.empty() || specs_.size() > 3) {
    throw StructuralError("grid must have 1 to 3 dimensions");
  }
  size_ = 1;
  for (const AxisSpec& s : specs_) {
    if (s.n_points < 8) {
      throw StructuralError("grid axis needs at least 8 points");
    }
    if (!(s.x_max > s.x_min)) {
      throw StructuralError("grid axis needs x_max > x_min");
    }
    size_ *= static_cast<std::size_t>(s.n_points);
  }
  if (size_ > point_cap) {
    std::ostringstream os;
    os << "grid has " << size_ << " points, exceeding the cap of " << point_cap;
    throw StructuralError(os.str());
  }

  for (const AxisSpec& s : specs_) {
    const double length = s.x_max - s.x_min;
    const double h = boundary_ == Boundary::periodic ? length / s.n_points
                                                     : length / (s.n_points - 1);
    dx_.push_back(h);
    cell_volume_ *= h;
    std::vector<double> pts(static_cast<std::size_t>(s.n_points));
    for (int i = 0; i < s.n_points; ++i) pts[static_cast<std::size_t>(i)] = s.x_min + h * i;
    axes_.push_back(std::move(pts));
  }

  strides_.assign(specs_.size(), 1);
  for (int d = ndim() - 2; d >= 0; --d) {
    strides_[static_cast<std::size_t>(d)] =
        strides_[static_cast<std::size_t>(d) + 1] *
        static_cast<std::size_t>(specs_[static_cast<std::size_t>(d) + 1].n_points);
  }
}

std::shared_ptr<const Grid> Grid::make_1d(double x_min, double x_max, int n,
                                          Boundary boundary) {
  return std::make_shared<const Grid>(std::vector<AxisSpec>{{x_min, x_max, n}}, boundary);
}

std::shared_ptr<const Grid> Grid::make(std::vector<AxisSpec> axes, Boundary boundary) {
  return std::make_shared<const Grid>(std::move(axes), boundary);
}

bool Grid::operator==(const Grid& other) const {
  if (boundary_ != other.boundary_ || specs_.size() != other.specs_.size()) return false;
  for (std::size_t d = 0; d < specs_.size(); ++d) {
    if (specs_[d].n_points != other.specs_[d].n_points) return false;
    if (specs_[d].x_min != other.specs_[d].x_min) return false;
    if (specs_[d].x_max != other.specs_[d].x_max) return false;
  }
  return true;
}

WaveState::WaveState(std::shared_ptr<const Grid> grid, Eigen::VectorXcd amplitudes,
                     double hbar, int channels)
    : grid_(std::move(grid)), channels_(channels), hbar_(hbar), amp_(std::move(amplitudes)) {
  if (!grid_) throw StructuralError("wave state needs a grid");
  if (channels_ < 1) throw StructuralError("wave state needs at least one channel");
  if (!(hbar_ > 0.0)) throw StructuralError("hbar must be positive");
  const auto expected = static_cast<Eigen::Index>(grid_->size()) * channels_;
  if (amp_.size() != expected) {
    throw StructuralError("amplitude vector size does not match grid x channels");
  }
  if (!amp_.allFinite()) throw StructuralError("wave state amplitudes must be finite");
}

WaveState WaveState::zero(std::shared_ptr<const Grid> grid, double hbar, int channels) {
  const auto n = static_cast<Eigen::Index>(grid->size()) * channels;
  return WaveState(std::move(grid), Eigen::VectorXcd::Zero(n), hbar, channels);
}

void require_compatible(const WaveState& a, const WaveState& b) {
  if (a.grid() != b.grid()) throw StructuralError("wave states live on different grids");
  if (a.channels() != b.channels()) {
    throw StructuralError("wave states have different channel counts");
  }
  if (a.hbar() != b.hbar()) throw StructuralError("wave states carry different hbar");
}

cdouble inner(const WaveState& a, const WaveState& b) {
  require_compatible(a, b);
  return a.grid().cell_volume() * a.amp().dot(b.amp());
}

double norm_sq(const WaveState& a) {
  return a.grid().cell_volume() * a.amp().squaredNorm();
}

double norm(const WaveState& a) { return std::sqrt(norm_sq(a)); }

WaveState normalized(const WaveState& a) {
  const double n = norm(a);
  if (!(n > 0.0)) throw StructuralError("cannot normalize a zero state");
  return WaveState(a.grid_ptr(), a.amp() / n, a.hbar(), a.channels());
}

double distance(const WaveState& a, const WaveState& b) {
  require_compatible(a, b);
  return std::sqrt(a.grid().cell_volume() * (a.amp() - b.amp()).squaredNorm());
}

WaveState operator+(const WaveState& a, const WaveState& b) {
  require_compatible(a, b);
  return WaveState(a.grid_ptr(), a.amp() + b.amp(), a.hbar(), a.channels());
}

WaveState operator-(const WaveState& a, const WaveState& b) {
  require_compatible(a, b);
  return WaveState(a.grid_ptr(), a.amp() - b.amp(), a.hbar(), a.channels());
}

WaveState operator*(cdouble s, const WaveState& a) {
  return WaveState(a.grid_ptr(), s * a.amp(), a.hbar(), a.channels());
}

WaveState gaussian_state(std::shared_ptr<const Grid> grid,
                         const std::vector<double>& centers,
                         const std::vector<double>& momenta,
                         const std::vector<double>& widths, double hbar) {
  const int d = grid->ndim();
  if (static_cast<int>(centers.size()) != d || static_cast<int>(momenta.size()) != d ||
      static_cast<int>(widths.size()) != d) {
    throw StructuralError("gaussian_state needs one center/momentum/width per axis");
  }
  for (double w : widths) {
    if (!(w > 0.0)) throw StructuralError("gaussian width must be positive");
  }
  Eigen::VectorXcd amp(static_cast<Eigen::Index>(grid->size()));
  for (std::size_t p = 0; p < grid->size(); ++p) {
    cdouble phase(0.0, 0.0);
    for (int ax = 0; ax < d; ++ax) {
      const double u = grid->coordinate(p, ax) - centers[static_cast<std::size_t>(ax)];
      phase += cdouble(-u * u / (4.0 * widths[static_cast<std::size_t>(ax)] *
                                 widths[static_cast<std::size_t>(ax)]),
                       momenta[static_cast<std::size_t>(ax)] * u / hbar);
    }
    amp[static_cast<Eigen::Index>(p)] = std::exp(phase);
  }
  return normalized(WaveState(std::move(grid), std::move(amp), hbar, 1));
}

}  // namespace vqd

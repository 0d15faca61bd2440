#include "vqd/hamiltonian.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace vqd {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Walks every 1D line of the flattened array along `axis`, calling
// f(base, stride) where the line's points are base + k*stride.
template <typename F>
void for_each_line(const Grid& g, int axis, F&& f) {
  const std::size_t n = static_cast<std::size_t>(g.n_points(axis));
  const std::size_t s = g.stride(axis);
  const std::size_t block = n * s;
  for (std::size_t base = 0; base < g.size(); base += block) {
    for (std::size_t in = 0; in < s; ++in) f(base + in, s);
  }
}

std::vector<double> fourier_wavenumbers(int n, double dx) {
  std::vector<double> k(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const int jj = j <= n / 2 ? j : j - n;
    k[static_cast<std::size_t>(j)] = 2.0 * kPi * jj / (n * dx);
  }
  return k;
}

// In-place FFT along one axis of one channel block.
void fft_axis(const Grid& g, Eigen::Ref<Eigen::VectorXcd> block, int axis, bool forward) {
  Eigen::FFT<double> fft;
  const std::size_t n = static_cast<std::size_t>(g.n_points(axis));
  std::vector<cdouble> line(n), out(n);
  for_each_line(g, axis, [&](std::size_t base, std::size_t stride) {
    for (std::size_t k = 0; k < n; ++k) line[k] = block[static_cast<Eigen::Index>(base + k * stride)];
    if (forward) {
      fft.fwd(out, line);
    } else {
      fft.inv(out, line);
    }
    for (std::size_t k = 0; k < n; ++k) block[static_cast<Eigen::Index>(base + k * stride)] = out[k];
  });
}

void spectral_kinetic_channel(const HamiltonianSpec& h, const Grid& g, double hbar,
                              Eigen::Ref<Eigen::VectorXcd> block) {
  for (int ax = 0; ax < g.ndim(); ++ax) fft_axis(g, block, ax, true);
  std::vector<std::vector<double>> ks;
  ks.reserve(static_cast<std::size_t>(g.ndim()));
  for (int ax = 0; ax < g.ndim(); ++ax) ks.push_back(fourier_wavenumbers(g.n_points(ax), g.dx(ax)));
  for (std::size_t p = 0; p < g.size(); ++p) {
    double t = 0.0;
    for (int ax = 0; ax < g.ndim(); ++ax) {
      const std::size_t j = (p / g.stride(ax)) % static_cast<std::size_t>(g.n_points(ax));
      const double k = ks[static_cast<std::size_t>(ax)][j];
      t += hbar * hbar * k * k / (2.0 * h.mass(ax));
    }
    block[static_cast<Eigen::Index>(p)] *= t;
  }
  for (int ax = 0; ax < g.ndim(); ++ax) fft_axis(g, block, ax, false);
}

void fd4_kinetic_channel(const HamiltonianSpec& h, const Grid& g, double hbar,
                         const Eigen::VectorXcd& in, Eigen::Ref<Eigen::VectorXcd> out) {
  const bool periodic = g.boundary() == Boundary::periodic;
  out.setZero();
  for (int ax = 0; ax < g.ndim(); ++ax) {
    const std::size_t n = static_cast<std::size_t>(g.n_points(ax));
    const double c = -hbar * hbar / (2.0 * h.mass(ax) * 12.0 * g.dx(ax) * g.dx(ax));
    for_each_line(g, ax, [&](std::size_t base, std::size_t stride) {
      auto at = [&](long k) -> cdouble {
        if (periodic) {
          const long kk = ((k % static_cast<long>(n)) + static_cast<long>(n)) % static_cast<long>(n);
          return in[static_cast<Eigen::Index>(base + static_cast<std::size_t>(kk) * stride)];
        }
        if (k < 0 || k >= static_cast<long>(n)) return cdouble(0.0, 0.0);
        return in[static_cast<Eigen::Index>(base + static_cast<std::size_t>(k) * stride)];
      };
      for (long k = 0; k < static_cast<long>(n); ++k) {
        const cdouble d2 = -at(k - 2) + 16.0 * at(k - 1) - 30.0 * at(k) + 16.0 * at(k + 1) - at(k + 2);
        out[static_cast<Eigen::Index>(base + static_cast<std::size_t>(k) * stride)] += c * d2;
      }
    });
  }
}

}  // namespace

HamiltonianSpec::HamiltonianSpec(std::shared_ptr<const Grid> grid, std::vector<double> masses,
                                 Eigen::VectorXd potential, KineticScheme kinetic)
    : grid_(std::move(grid)), masses_(std::move(masses)), kinetic_(kinetic), v_(std::move(potential)) {
  if (!grid_) throw StructuralError("hamiltonian needs a grid");
  if (static_cast<int>(masses_.size()) != grid_->ndim()) {
    throw StructuralError("hamiltonian needs one mass per grid dimension");
  }
  for (double m : masses_) {
    if (!(m > 0.0)) throw StructuralError("masses must be positive");
  }
  if (v_.size() != static_cast<Eigen::Index>(grid_->size())) {
    throw StructuralError("potential table size does not match grid");
  }
  if (!v_.allFinite()) throw StructuralError("potential must be finite");
}

HamiltonianSpec::HamiltonianSpec(std::shared_ptr<const Grid> grid, std::vector<double> masses,
                                 std::vector<Eigen::MatrixXcd> diabatic, KineticScheme kinetic)
    : grid_(std::move(grid)), masses_(std::move(masses)), kinetic_(kinetic), dia_(std::move(diabatic)) {
  if (!grid_) throw StructuralError("hamiltonian needs a grid");
  if (static_cast<int>(masses_.size()) != grid_->ndim()) {
    throw StructuralError("hamiltonian needs one mass per grid dimension");
  }
  for (double m : masses_) {
    if (!(m > 0.0)) throw StructuralError("masses must be positive");
  }
  if (dia_.size() != grid_->size()) {
    throw StructuralError("diabatic table size does not match grid");
  }
  n_el_ = static_cast<int>(dia_.front().rows());
  if (n_el_ < 2) throw StructuralError("diabatic variant needs at least two channels");
  for (const auto& m : dia_) {
    if (m.rows() != n_el_ || m.cols() != n_el_) {
      throw StructuralError("diabatic matrices must share one square size");
    }
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + m.cwiseAbs().maxCoeff())) {
      throw StructuralError("diabatic matrices must be Hermitian");
    }
  }
}

const Eigen::VectorXd& HamiltonianSpec::potential() const {
  if (diabatic()) throw StructuralError("diabatic hamiltonian has no scalar potential");
  return v_;
}

const Eigen::MatrixXcd& HamiltonianSpec::diabatic_matrix(std::size_t point) const {
  if (!diabatic()) throw StructuralError("scalar hamiltonian has no diabatic matrix");
  return dia_.at(point);
}

HamiltonianSpec HamiltonianSpec::shifted(double eps) const {
  if (!diabatic()) {
    return HamiltonianSpec(grid_, masses_, v_.array() - eps, kinetic_);
  }
  std::vector<Eigen::MatrixXcd> dia = dia_;
  for (auto& m : dia) m -= eps * Eigen::MatrixXcd::Identity(n_el_, n_el_);
  return HamiltonianSpec(grid_, masses_, std::move(dia), kinetic_);
}

double edge_amplitude_ratio(const WaveState& psi) {
  const Grid& g = psi.grid();
  const double peak = psi.amp().cwiseAbs().maxCoeff();
  if (peak == 0.0) return 0.0;
  double edge = 0.0;
  for (int c = 0; c < psi.channels(); ++c) {
    const auto block = psi.channel(c);
    for (std::size_t p = 0; p < g.size(); ++p) {
      bool on_edge = false;
      for (int ax = 0; ax < g.ndim(); ++ax) {
        const std::size_t j = (p / g.stride(ax)) % static_cast<std::size_t>(g.n_points(ax));
        if (j == 0 || j + 1 == static_cast<std::size_t>(g.n_points(ax))) on_edge = true;
      }
      if (on_edge) edge = std::max(edge, std::abs(block[static_cast<Eigen::Index>(p)]));
    }
  }
  return edge / peak;
}

WaveState apply_kinetic(const HamiltonianSpec& h, const WaveState& psi) {
  if (h.grid() != psi.grid()) throw StructuralError("hamiltonian and state grids differ");
  const Grid& g = psi.grid();
  WaveState out(psi.grid_ptr(), psi.amp(), psi.hbar(), psi.channels());
  for (int c = 0; c < psi.channels(); ++c) {
    if (h.kinetic() == KineticScheme::spectral) {
      spectral_kinetic_channel(h, g, psi.hbar(), out.channel(c));
    } else {
      fd4_kinetic_channel(h, g, psi.hbar(), Eigen::VectorXcd(psi.channel(c)), out.channel(c));
    }
  }
  return out;
}

WaveState apply_h(const HamiltonianSpec& h, const WaveState& psi, WarningLog* warnings) {
  if (h.grid() != psi.grid()) throw StructuralError("hamiltonian and state grids differ");
  if (psi.channels() != h.n_channels()) {
    throw StructuralError("state channel count does not match hamiltonian");
  }
  if (warnings && psi.grid().boundary() == Boundary::boxed) {
    const double r = edge_amplitude_ratio(psi);
    if (r > 1e-8) {
      std::ostringstream os;
      os << "boxed state not decayed at grid edge (edge/max amplitude " << r << ")";
      warnings->add(os.str());
    }
  }

  WaveState out = apply_kinetic(h, psi);
  const Grid& g = psi.grid();
  if (!h.diabatic()) {
    out.channel(0) += h.potential().cast<cdouble>().cwiseProduct(psi.channel(0));
  } else {
    for (std::size_t p = 0; p < g.size(); ++p) {
      const Eigen::MatrixXcd& m = h.diabatic_matrix(p);
      for (int a = 0; a < h.n_channels(); ++a) {
        cdouble acc(0.0, 0.0);
        for (int b = 0; b < h.n_channels(); ++b) {
          acc += m(a, b) * psi.channel(b)[static_cast<Eigen::Index>(p)];
        }
        out.channel(a)[static_cast<Eigen::Index>(p)] += acc;
      }
    }
  }
  return out;
}

std::pair<double, double> energy_moments(const HamiltonianSpec& h, const WaveState& psi) {
  const double n = norm(psi);
  if (std::abs(n - 1.0) > 1e-8) {
    throw StructuralError("energy_moments needs a normalized state");
  }
  const WaveState hpsi = apply_h(h, psi);
  const double e_bar = std::real(inner(psi, hpsi));
  const WaveState resid = hpsi - (cdouble(e_bar, 0.0) * psi);
  return {e_bar, norm_sq(resid)};
}

WaveState derivative(const WaveState& psi, int axis, KineticScheme scheme) {
  const Grid& g = psi.grid();
  if (axis < 0 || axis >= g.ndim()) throw StructuralError("derivative axis out of range");
  WaveState out(psi.grid_ptr(), psi.amp(), psi.hbar(), psi.channels());
  const std::size_t n = static_cast<std::size_t>(g.n_points(axis));
  if (scheme == KineticScheme::spectral) {
    const auto ks = fourier_wavenumbers(g.n_points(axis), g.dx(axis));
    for (int c = 0; c < psi.channels(); ++c) {
      auto block = out.channel(c);
      fft_axis(g, block, axis, true);
      for (std::size_t p = 0; p < g.size(); ++p) {
        const std::size_t j = (p / g.stride(axis)) % n;
        // Drop the Nyquist mode for the odd-order derivative.
        const double k = (static_cast<int>(j) == g.n_points(axis) / 2) ? 0.0 : ks[j];
        block[static_cast<Eigen::Index>(p)] *= cdouble(0.0, k);
      }
      fft_axis(g, block, axis, false);
    }
    return out;
  }
  const bool periodic = g.boundary() == Boundary::periodic;
  const double c1 = 1.0 / (12.0 * g.dx(axis));
  for (int c = 0; c < psi.channels(); ++c) {
    const Eigen::VectorXcd in(psi.channel(c));
    auto block = out.channel(c);
    for_each_line(g, axis, [&](std::size_t base, std::size_t stride) {
      auto at = [&](long k) -> cdouble {
        if (periodic) {
          const long kk = ((k % static_cast<long>(n)) + static_cast<long>(n)) % static_cast<long>(n);
          return in[static_cast<Eigen::Index>(base + static_cast<std::size_t>(kk) * stride)];
        }
        if (k < 0 || k >= static_cast<long>(n)) return cdouble(0.0, 0.0);
        return in[static_cast<Eigen::Index>(base + static_cast<std::size_t>(k) * stride)];
      };
      for (long k = 0; k < static_cast<long>(n); ++k) {
        block[static_cast<Eigen::Index>(base + static_cast<std::size_t>(k) * stride)] =
            c1 * (at(k - 2) - 8.0 * at(k - 1) + 8.0 * at(k + 1) - at(k + 2));
      }
    });
  }
  return out;
}

WaveState apply_momentum(const WaveState& psi, int axis, KineticScheme scheme) {
  return cdouble(0.0, -psi.hbar()) * derivative(psi, axis, scheme);
}

WaveState multiply_coordinate(const WaveState& psi, int axis, double shift) {
  const Grid& g = psi.grid();
  if (axis < 0 || axis >= g.ndim()) throw StructuralError("coordinate axis out of range");
  WaveState out(psi.grid_ptr(), psi.amp(), psi.hbar(), psi.channels());
  for (int c = 0; c < psi.channels(); ++c) {
    auto block = out.channel(c);
    for (std::size_t p = 0; p < g.size(); ++p) {
      block[static_cast<Eigen::Index>(p)] *= g.coordinate(p, axis) - shift;
    }
  }
  return out;
}

WaveState multiply_function(const WaveState& psi, const Eigen::VectorXd& f) {
  if (f.size() != psi.points()) throw StructuralError("function table size does not match grid");
  WaveState out(psi.grid_ptr(), psi.amp(), psi.hbar(), psi.channels());
  for (int c = 0; c < psi.channels(); ++c) {
    out.channel(c) = f.cast<cdouble>().cwiseProduct(out.channel(c));
  }
  return out;
}

Eigen::MatrixXcd dense_matrix(const HamiltonianSpec& h, double hbar) {
  const Eigen::Index n =
      static_cast<Eigen::Index>(h.grid().size()) * h.n_channels();
  Eigen::MatrixXcd m(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n);
    e[j] = cdouble(1.0, 0.0);
    WaveState basis(h.grid_ptr(), std::move(e), hbar, h.n_channels());
    m.col(j) = apply_h(h, basis).amp();
  }
  return m;
}

Eigen::VectorXd table_derivative(const Grid& grid, const Eigen::VectorXd& f, int axis) {
  if (f.size() != static_cast<Eigen::Index>(grid.size())) {
    throw StructuralError("table size does not match grid");
  }
  Eigen::VectorXd out(f.size());
  const std::size_t n = static_cast<std::size_t>(grid.n_points(axis));
  const double h = grid.dx(axis);
  const bool periodic = grid.boundary() == Boundary::periodic;
  for_each_line(grid, axis, [&](std::size_t base, std::size_t stride) {
    auto at = [&](long k) -> double {
      const long kk = ((k % static_cast<long>(n)) + static_cast<long>(n)) % static_cast<long>(n);
      return f[static_cast<Eigen::Index>(base + static_cast<std::size_t>(kk) * stride)];
    };
    for (long k = 0; k < static_cast<long>(n); ++k) {
      double d;
      if (periodic || (k >= 2 && k + 2 < static_cast<long>(n))) {
        d = (at(k - 2) - 8.0 * at(k - 1) + 8.0 * at(k + 1) - at(k + 2)) / (12.0 * h);
      } else if (k == 0) {
        d = (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h);
      } else if (k == static_cast<long>(n) - 1) {
        d = (3.0 * at(k) - 4.0 * at(k - 1) + at(k - 2)) / (2.0 * h);
      } else {
        d = (at(k + 1) - at(k - 1)) / (2.0 * h);
      }
      out[static_cast<Eigen::Index>(base + static_cast<std::size_t>(k) * stride)] = d;
    }
  });
  return out;
}

namespace {

std::vector<std::vector<double>> read_csv_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StructuralError("cannot open CSV file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        row.push_back(v);
        (void)used;
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;  // header line
      }
      throw StructuralError("non-numeric CSV row in " + path + ": " + line);
    }
    first = false;
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw StructuralError("CSV file has no data rows: " + path);
  return rows;
}

std::vector<double> unique_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (double x : v) {
    if (out.empty() || std::abs(x - out.back()) > 1e-12 * (1.0 + std::abs(x))) out.push_back(x);
  }
  return out;
}

AxisSpec axis_from_values(const std::vector<double>& vals, const std::string& path) {
  if (vals.size() < 8) throw StructuralError("CSV axis has fewer than 8 points: " + path);
  const double h = vals[1] - vals[0];
  for (std::size_t i = 1; i < vals.size(); ++i) {
    if (std::abs(vals[i] - vals[i - 1] - h) > 1e-9 * (1.0 + std::abs(h))) {
      throw StructuralError("CSV axis is not uniformly spaced: " + path);
    }
  }
  return AxisSpec{vals.front(), vals.back(), static_cast<int>(vals.size())};
}

}  // namespace

PotentialTable load_potential_csv(const std::string& path) {
  const auto rows = read_csv_rows(path);
  const std::size_t ncols = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != ncols) throw StructuralError("ragged CSV rows in " + path);
  }
  PotentialTable table;
  if (ncols == 2) {
    // x, V
    std::vector<double> xs;
    xs.reserve(rows.size());
    for (const auto& r : rows) xs.push_back(r[0]);
    const auto ux = unique_sorted(xs);
    if (ux.size() != rows.size()) throw StructuralError("duplicate x values in " + path);
    table.axes = {axis_from_values(ux, path)};
    table.scalar.resize(static_cast<Eigen::Index>(rows.size()));
    std::map<double, double> by_x;
    for (const auto& r : rows) by_x[r[0]] = r[1];
    Eigen::Index i = 0;
    for (double x : ux) table.scalar[i++] = by_x[x];
  } else if (ncols == 3) {
    // x, y, V on a full tensor grid
    std::vector<double> xs, ys;
    for (const auto& r : rows) {
      xs.push_back(r[0]);
      ys.push_back(r[1]);
    }
    const auto ux = unique_sorted(xs);
    const auto uy = unique_sorted(ys);
    if (ux.size() * uy.size() != rows.size()) {
      throw StructuralError("2D CSV table is not a full tensor grid: " + path);
    }
    table.axes = {axis_from_values(ux, path), axis_from_values(uy, path)};
    table.scalar.resize(static_cast<Eigen::Index>(rows.size()));
    auto locate = [](const std::vector<double>& u, double v) {
      const auto it = std::lower_bound(u.begin(), u.end(), v - 1e-9);
      return static_cast<std::size_t>(it - u.begin());
    };
    for (const auto& r : rows) {
      const std::size_t ix = locate(ux, r[0]);
      const std::size_t iy = locate(uy, r[1]);
      table.scalar[static_cast<Eigen::Index>(ix * uy.size() + iy)] = r[2];
    }
  } else if (ncols == 4) {
    // x, V11, V12, V22 (two-state diabatic)
    std::vector<double> xs;
    for (const auto& r : rows) xs.push_back(r[0]);
    const auto ux = unique_sorted(xs);
    if (ux.size() != rows.size()) throw StructuralError("duplicate x values in " + path);
    table.axes = {axis_from_values(ux, path)};
    table.n_el = 2;
    std::map<double, std::array<double, 3>> by_x;
    for (const auto& r : rows) by_x[r[0]] = {r[1], r[2], r[3]};
    for (double x : ux) {
      Eigen::MatrixXcd m(2, 2);
      const auto& v = by_x[x];
      m << v[0], v[1], v[1], v[2];
      table.diabatic.push_back(m);
    }
  } else {
    throw StructuralError("unsupported CSV column count in " + path);
  }
  return table;
}

HamiltonianSpec hamiltonian_from_table(std::shared_ptr<const Grid> grid,
                                       std::vector<double> masses,
                                       const PotentialTable& table, KineticScheme kinetic) {
  if (static_cast<int>(table.axes.size()) != grid->ndim()) {
    throw StructuralError("potential table dimensionality does not match grid");
  }
  for (int d = 0; d < grid->ndim(); ++d) {
    const auto& spec = table.axes[static_cast<std::size_t>(d)];
    if (spec.n_points != grid->n_points(d)) {
      throw StructuralError("potential table point count does not match grid");
    }
    for (int i = 0; i < spec.n_points; ++i) {
      const double expect = grid->axis(d)[static_cast<std::size_t>(i)];
      const double got = spec.x_min + i * (spec.x_max - spec.x_min) / (spec.n_points - 1);
      if (std::abs(expect - got) > 1e-9 * (1.0 + std::abs(expect))) {
        throw StructuralError("potential table coordinates do not match grid");
      }
    }
  }
  if (table.n_el == 1) {
    return HamiltonianSpec(std::move(grid), std::move(masses), table.scalar, kinetic);
  }
  return HamiltonianSpec(std::move(grid), std::move(masses), table.diabatic, kinetic);
}

}  // namespace vqd

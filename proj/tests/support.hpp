#pragma once

#include <cmath>
#include <random>

#include "vqd/fga.hpp"
#include "vqd/hamiltonian.hpp"

namespace vqd::testing {

inline constexpr double kPi = 3.14159265358979323846;

inline HamiltonianSpec harmonic_h(std::shared_ptr<const Grid> grid, double mass, double omega,
                                  double center = 0.0,
                                  KineticScheme kin = KineticScheme::spectral) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(grid->size()));
  for (std::size_t p = 0; p < grid->size(); ++p) {
    const double u = grid->coordinate(p, 0) - center;
    v[static_cast<Eigen::Index>(p)] = 0.5 * mass * omega * omega * u * u;
  }
  return HamiltonianSpec(std::move(grid), {mass}, std::move(v), kin);
}

inline HamiltonianSpec quartic_h(std::shared_ptr<const Grid> grid, double mass,
                                 double coefficient = 0.25,
                                 KineticScheme kin = KineticScheme::spectral) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(grid->size()));
  for (std::size_t p = 0; p < grid->size(); ++p) {
    const double x = grid->coordinate(p, 0);
    v[static_cast<Eigen::Index>(p)] = coefficient * x * x * x * x;
  }
  return HamiltonianSpec(std::move(grid), {mass}, std::move(v), kin);
}

inline HamiltonianSpec polynomial_h(std::shared_ptr<const Grid> grid, double mass,
                                    const std::vector<double>& coeffs,
                                    KineticScheme kin = KineticScheme::spectral) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid->size()));
  for (std::size_t p = 0; p < grid->size(); ++p) {
    const double x = grid->coordinate(p, 0);
    double xp = 1.0;
    for (double c : coeffs) {
      v[static_cast<Eigen::Index>(p)] += c * xp;
      xp *= x;
    }
  }
  return HamiltonianSpec(std::move(grid), {mass}, std::move(v), kin);
}

/// Harmonic-oscillator eigenstate on the grid (analytic Hermite functions).
inline WaveState ho_eigenstate(std::shared_ptr<const Grid> grid, int n, double mass,
                               double omega, double hbar = 1.0, double center = 0.0) {
  const double a = std::sqrt(mass * omega / hbar);
  Eigen::VectorXcd amp(static_cast<Eigen::Index>(grid->size()));
  for (std::size_t p = 0; p < grid->size(); ++p) {
    const double xi = a * (grid->coordinate(p, 0) - center);
    double h0 = 1.0, h1 = 2.0 * xi;
    double h = n == 0 ? h0 : h1;
    for (int k = 1; k < n; ++k) {
      const double next = 2.0 * xi * h1 - 2.0 * k * h0;
      h0 = h1;
      h1 = next;
      h = next;
    }
    amp[static_cast<Eigen::Index>(p)] = h * std::exp(-0.5 * xi * xi);
  }
  return normalized(WaveState(std::move(grid), std::move(amp), hbar, 1));
}

/// Smooth random state: a few random Gaussian wavepackets, normalized.
inline WaveState random_smooth_state(std::shared_ptr<const Grid> grid, std::mt19937_64& rng,
                                     double hbar = 1.0, int n_packets = 3) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXcd amp = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(grid->size()));
  const int d = grid->ndim();
  for (int k = 0; k < n_packets; ++k) {
    std::vector<double> c(static_cast<std::size_t>(d)), q(static_cast<std::size_t>(d)),
        w(static_cast<std::size_t>(d));
    for (int ax = 0; ax < d; ++ax) {
      const double lo = grid->x_min(ax);
      const double hi = grid->x_max(ax);
      const double span = hi - lo;
      // Decayed well inside the box and resolved by many grid points, so
      // both kinetic discretizations see a genuinely smooth state.
      c[static_cast<std::size_t>(ax)] = lo + span * (0.4 + 0.2 * unit(rng));
      w[static_cast<std::size_t>(ax)] = span * (0.03 + 0.006 * unit(rng));
      q[static_cast<std::size_t>(ax)] =
          (unit(rng) - 0.5) * 0.4 * hbar / w[static_cast<std::size_t>(ax)];
    }
    const cdouble weight(unit(rng) - 0.5, unit(rng) - 0.5);
    const WaveState g = gaussian_state(grid, c, q, w, hbar);
    amp += weight * g.amp();
  }
  return normalized(WaveState(std::move(grid), std::move(amp), hbar, 1));
}

}  // namespace vqd::testing

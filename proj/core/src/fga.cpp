#include "vqd/fga.hpp"

#include <cmath>

namespace vqd::fga {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_support(const CoherentState& s, const Grid& grid) {
  if (grid.ndim() != 1) throw StructuralError("coherent states live on 1D grids");
  const double q0 = s.q0();
  if (q0 - 6.0 * s.dq < grid.x_min(0) || q0 + 6.0 * s.dq > grid.x_max(0)) {
    throw StructuralError("grid does not cover q0 +- 6 dq of the coherent state");
  }
  const double k_need = std::abs(s.p0()) / s.hbar + 3.0 / s.dq;
  if (k_need > kPi / grid.dx(0)) {
    throw StructuralError("coherent state leaks past the grid momentum cutoff");
  }
}

double second_derivative_at(const Grid& grid, const Eigen::VectorXd& table, double x0) {
  const double dx = grid.dx(0);
  long j = std::lround((x0 - grid.x_min(0)) / dx);
  j = std::max<long>(2, std::min<long>(grid.n_points(0) - 3, j));
  const auto f = [&](long k) { return table[static_cast<Eigen::Index>(j + k)]; };
  return (-f(-2) + 16.0 * f(-1) - 30.0 * f(0) + 16.0 * f(1) - f(2)) / (12.0 * dx * dx);
}

}  // namespace

WaveState coherent_to_grid(const CoherentState& s, std::shared_ptr<const Grid> grid) {
  check_support(s, *grid);
  const double q0 = s.q0();
  const double p0 = s.p0();
  const double pref = std::pow(2.0 * kPi * s.dq * s.dq, -0.25);
  Eigen::VectorXcd amp(static_cast<Eigen::Index>(grid->size()));
  for (std::size_t p = 0; p < grid->size(); ++p) {
    const double x = grid->coordinate(p, 0);
    const double u = x - q0;
    const cdouble expo(-u * u / (4.0 * s.dq * s.dq),
                       p0 * (x - 0.5 * q0) / s.hbar + s.theta);
    amp[static_cast<Eigen::Index>(p)] = pref * std::exp(expo);
  }
  return WaveState(std::move(grid), std::move(amp), s.hbar, 1);
}

WaveState apply_lowering(const CoherentState& s, const WaveState& psi, KineticScheme scheme) {
  WaveState out = cdouble(1.0 / (2.0 * s.dq), 0.0) * multiply_coordinate(psi, 0);
  return out + (cdouble(s.dq, 0.0) * derivative(psi, 0, scheme));
}

WaveState apply_raising(const CoherentState& s, const WaveState& psi, KineticScheme scheme) {
  WaveState out = cdouble(1.0 / (2.0 * s.dq), 0.0) * multiply_coordinate(psi, 0);
  return out - (cdouble(s.dq, 0.0) * derivative(psi, 0, scheme));
}

cdouble fga_rhs(const HamiltonianSpec& h, const CoherentState& s) {
  const WaveState psi = coherent_to_grid(s, h.grid_ptr());
  const WaveState a_psi = apply_lowering(s, psi, h.kinetic());
  const WaveState h_a_psi = apply_h(h, a_psi);
  const WaveState h_psi = apply_h(h, psi);
  const WaveState a_h_psi = apply_lowering(s, h_psi, h.kinetic());
  const cdouble comm = inner(psi, h_a_psi) - inner(psi, a_h_psi);  // <[H, a]>
  return cdouble(0.0, 1.0 / s.hbar) * comm / inner(psi, psi);
}

double theta_rate(double e_bar, cdouble z, cdouble zdot, double hbar) {
  return -std::imag(zdot * std::conj(z)) - e_bar / hbar;
}

WaveState tangent_standard_gauge(const CoherentState& s, const WaveState& psi, cdouble zdot,
                                 KineticScheme scheme) {
  const WaveState adag_psi = apply_raising(s, psi, scheme);
  return zdot * (adag_psi - (std::conj(s.z) * psi));
}

ErrorReport fga_error(const HamiltonianSpec& h, const CoherentState& s) {
  const WaveState psi = normalized(coherent_to_grid(s, h.grid_ptr()));
  const cdouble zdot = fga_rhs(h, s);
  const WaveState psidot_plus = tangent_standard_gauge(s, psi, zdot, h.kinetic());
  // Hand the diagnostics the exact-gauge derivative; the gauge correction is
  // centralized there.
  const auto [e_bar, var_e] = energy_moments(h, psi);
  (void)var_e;
  const WaveState psidot = psidot_plus - (cdouble(0.0, e_bar / s.hbar) * psi);
  ErrorReport rep = local_error(h, psi, psidot);

  // Closed-form rate: deriv_norm_sq must reproduce |zdot|^2 up to the grid
  // projection error of the unit-norm tangent direction.
  const double z2 = std::norm(zdot);
  if (std::abs(rep.deriv_norm_sq - z2) > 1e-7 * std::max(z2, rep.var_e / (s.hbar * s.hbar))) {
    rep.stationarity_ok = false;
  }
  return rep;
}

double variational_variance(const HamiltonianSpec& h, const CoherentState& s) {
  const WaveState psi = coherent_to_grid(s, h.grid_ptr());
  const WaveState hpsi = apply_h(h, psi);
  // <V'> by quadrature, via Re <[H,a]> = -hbar <V'>/(2 dp).
  const cdouble comm = inner(psi, apply_h(h, apply_lowering(s, psi, h.kinetic()))) -
                       inner(psi, apply_lowering(s, hpsi, h.kinetic()));
  const double v_prime = -std::real(comm) * 2.0 * s.dp() / s.hbar;
  // H_v psi = (p0/m)(p_hat - p0) psi + <V'> (q_hat - q0) psi
  const WaveState dp_psi =
      apply_momentum(psi, 0, h.kinetic()) - (cdouble(s.p0(), 0.0) * psi);
  const WaveState dq_psi = multiply_coordinate(psi, 0, s.q0());
  const WaveState hv_psi =
      (cdouble(s.p0() / s.mass, 0.0) * dp_psi) + (cdouble(v_prime, 0.0) * dq_psi);
  return norm_sq(hv_psi);
}

double fga_error_lowest_order(const PotentialDerivatives& d, double dq, double mass,
                              double omega, double hbar) {
  if (!(dq > 0.0)) throw StructuralError("width must be positive");
  const double m_delta2 = d.v2 - mass * omega * omega;
  const double radicand =
      0.5 * m_delta2 * m_delta2 + (d.v3 * d.v3 / 6.0 + 0.5 * m_delta2 * d.v4) * dq * dq;
  if (radicand < 0.0) {
    throw StructuralError("negative radicand in the width expansion (invalid derivatives)");
  }
  return dq * dq * std::sqrt(radicand) / hbar;
}

double match_width(const HamiltonianSpec& h, double q0, double mass, double hbar) {
  const double v2 = second_derivative_at(h.grid(), h.potential(), q0);
  if (!(v2 > 0.0)) {
    throw StructuralError("width matching needs positive curvature at the center");
  }
  const double w = std::sqrt(v2 / mass);
  return std::sqrt(hbar / (2.0 * mass * w));
}

WidthSchedule WidthSchedule::constant(double dq0) {
  WidthSchedule s;
  s.kind_ = Kind::constant;
  s.dq0_ = dq0;
  return s;
}

WidthSchedule WidthSchedule::linear(double dq0, double rate) {
  WidthSchedule s;
  s.kind_ = Kind::linear;
  s.dq0_ = dq0;
  s.a_ = rate;
  return s;
}

WidthSchedule WidthSchedule::sinusoidal(double dq0, double amplitude, double rate) {
  WidthSchedule s;
  s.kind_ = Kind::sinusoidal;
  s.dq0_ = dq0;
  s.a_ = amplitude;
  s.b_ = rate;
  return s;
}

double WidthSchedule::dq(double t) const {
  switch (kind_) {
    case Kind::constant: return dq0_;
    case Kind::linear: return dq0_ + a_ * t;
    case Kind::sinusoidal: return dq0_ * (1.0 + a_ * std::sin(b_ * t));
  }
  return dq0_;
}

double WidthSchedule::dq_dot(double t) const {
  switch (kind_) {
    case Kind::constant: return 0.0;
    case Kind::linear: return a_;
    case Kind::sinusoidal: return dq0_ * a_ * b_ * std::cos(b_ * t);
  }
  return 0.0;
}

VariationalRates variational_rates(const HamiltonianSpec& h, const CoherentState& s,
                                   double dq_dot) {
  const WaveState psi = coherent_to_grid(s, h.grid_ptr());
  const double hbar = s.hbar;

  // Tangent directions of the (Re z, Im z, theta) parametrization.
  const WaveState adag_psi = apply_raising(s, psi, h.kinetic());
  const WaveState t_u = adag_psi - (cdouble(std::real(s.z), 0.0) * psi);
  const WaveState t_v = (cdouble(0.0, 1.0) * adag_psi) - (cdouble(std::imag(s.z), 0.0) * psi);
  const WaveState t_th = cdouble(0.0, 1.0) * psi;

  // Guided direction d psi / d dq by central differencing of the exact grid
  // projection.
  WaveState guided = WaveState::zero(psi.grid_ptr(), hbar, 1);
  if (dq_dot != 0.0) {
    const double step = 1e-6 * s.dq;
    CoherentState plus = s, minus = s;
    plus.dq += step;
    minus.dq -= step;
    const WaveState psi_p = coherent_to_grid(plus, psi.grid_ptr());
    const WaveState psi_m = coherent_to_grid(minus, psi.grid_ptr());
    guided = cdouble(dq_dot / (2.0 * step), 0.0) * (psi_p - psi_m);
  }

  const WaveState hpsi = apply_h(h, psi);
  const WaveState b = hpsi - (cdouble(0.0, hbar) * guided);

  const WaveState* ts[3] = {&t_u, &t_v, &t_th};
  Eigen::Matrix3d m;
  Eigen::Vector3d rhs;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      m(i, j) = hbar * hbar * std::real(inner(*ts[i], *ts[j]));
    }
    rhs(i) = hbar * std::imag(inner(*ts[i], b));  // Re <i hbar T_i | b>
  }
  const Eigen::Vector3d c = m.ldlt().solve(rhs);

  VariationalRates out{cdouble(c(0), c(1)), c(2),
                       (cdouble(c(0), 0.0) * t_u) + (cdouble(c(1), 0.0) * t_v) +
                           (cdouble(c(2), 0.0) * t_th),
                       guided};
  return out;
}

namespace {

FgaRun run_common(const HamiltonianSpec& h, CoherentState s0, const WidthSchedule* schedule,
                  double t_final, int n_samples, const OdeOptions& opts) {
  if (!(t_final > 0.0)) throw StructuralError("t_final must be positive");
  if (n_samples < 2) throw StructuralError("need at least 2 samples");

  std::vector<double> times(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) times[static_cast<std::size_t>(i)] = t_final * i / (n_samples - 1);

  FgaRun run;
  auto state_at = [&](const std::vector<double>& y, double t) {
    CoherentState s = s0;
    s.z = cdouble(y[0], y[1]);
    s.theta = y[2];
    if (schedule) s.dq = schedule->dq(t);
    return s;
  };

  OdeSystem sys = [&](const std::vector<double>& y, std::vector<double>& dydt, double t) {
    const CoherentState s = state_at(y, t);
    if (schedule) {
      const VariationalRates r = variational_rates(h, s, schedule->dq_dot(t));
      dydt = {std::real(r.zdot), std::imag(r.zdot), r.theta_dot};
    } else {
      const cdouble zdot = fga_rhs(h, s);
      const WaveState psi = coherent_to_grid(s, h.grid_ptr());
      const auto [e_bar, var] = energy_moments(h, normalized(psi));
      (void)var;
      dydt = {std::real(zdot), std::imag(zdot), theta_rate(e_bar, s.z, zdot, s.hbar)};
    }
  };

  OdeObserver obs = [&](const std::vector<double>& y, double t) {
    const CoherentState s = state_at(y, t);
    run.times.push_back(t);
    run.states.push_back(s);
    ErrorReport rep;
    if (schedule) {
      const VariationalRates r = variational_rates(h, s, schedule->dq_dot(t));
      const WaveState psi = normalized(coherent_to_grid(s, h.grid_ptr()));
      rep = guided_error(h, psi, r.psidot_var, r.psidot_guided);
    } else {
      rep = fga_error(h, s);
    }
    rep.t = t;
    run.reports.push_back(rep);
  };

  std::vector<double> y = {std::real(s0.z), std::imag(s0.z), s0.theta};
  integrate_sampled(sys, y, times, opts, obs);
  accumulate_bound(run.reports);
  return run;
}

}  // namespace

FgaRun propagate(const HamiltonianSpec& h, CoherentState s0, double t_final, int n_samples,
                 const OdeOptions& opts) {
  return run_common(h, s0, nullptr, t_final, n_samples, opts);
}

FgaRun propagate_guided(const HamiltonianSpec& h, CoherentState s0,
                        const WidthSchedule& schedule, double t_final, int n_samples,
                        const OdeOptions& opts) {
  CoherentState s = s0;
  s.dq = schedule.dq(0.0);
  return run_common(h, s, &schedule, t_final, n_samples, opts);
}

}  // namespace vqd::fga

#pragma once

#include "vqd/diagnostics.hpp"
#include "vqd/ode.hpp"

namespace vqd::fga {

/// Frozen-width coherent state in the Bargmann parametrization. The width
/// pair is minimum-uncertainty by construction: dp = hbar / (2 dq).
struct CoherentState {
  cdouble z{0.0, 0.0};
  double dq = 1.0;     ///< coordinate width (length)
  double mass = 1.0;
  double theta = 0.0;  ///< gauge phase
  double hbar = 1.0;

  double dp() const { return hbar / (2.0 * dq); }
  double omega() const { return hbar / (2.0 * mass * dq * dq); }
  double q0() const { return 2.0 * dq * std::real(z); }
  double p0() const { return 2.0 * dp() * std::imag(z); }
};

/// 2nd to 4th derivatives of the potential at the wavepacket center.
struct PotentialDerivatives {
  double v2 = 0.0;
  double v3 = 0.0;
  double v4 = 0.0;
};

/// Exact grid projection, phase convention
///   psi(x) = e^{i theta} (2 pi dq^2)^{-1/4}
///            exp(-(x-q0)^2/(4 dq^2) + i p0 (x - q0/2) / hbar).
/// Requires the grid to cover q0 +- 6 dq and the momentum content to fit
/// under the grid's Nyquist limit.
WaveState coherent_to_grid(const CoherentState& s, std::shared_ptr<const Grid> grid);

/// Ladder operators realized on the grid: a = (x - 0)/(2 dq) + dq d/dx.
WaveState apply_lowering(const CoherentState& s, const WaveState& psi,
                         KineticScheme scheme = KineticScheme::spectral);
WaveState apply_raising(const CoherentState& s, const WaveState& psi,
                        KineticScheme scheme = KineticScheme::spectral);

/// dz/dt = (i/hbar) <[H, a]> / <psi|psi>, evaluated by grid quadrature.
cdouble fga_rhs(const HamiltonianSpec& h, const CoherentState& s);

/// Optimal gauge phase rate: hbar theta_dot = -hbar Im(zdot z*) - E_bar.
double theta_rate(double e_bar, cdouble z, cdouble zdot, double hbar);

/// Standard-gauge tangent zdot (a^dag - z*) |psi> on the grid.
WaveState tangent_standard_gauge(const CoherentState& s, const WaveState& psi, cdouble zdot,
                                 KineticScheme scheme = KineticScheme::spectral);

/// Local error of the frozen-Gaussian dynamics at this state, with the
/// closed-form rate hbar^2 eps^2 = var_E - hbar^2 |zdot|^2 cross-checked
/// against the grid residual diagnostics.
ErrorReport fga_error(const HamiltonianSpec& h, const CoherentState& s);

/// <H_v^2> for H_v = (p0/m) dp_hat + <V'> dq_hat, the variance of the
/// effective linearized generator; equals hbar^2 |zdot|^2.
double variational_variance(const HamiltonianSpec& h, const CoherentState& s);

/// Leading-order width expansion of the error:
///   hbar eps ~ dq^2 sqrt(m^2 Delta^4 / 2 + (|v3|^2/6 + m Delta^2 v4 / 2) dq^2)
/// with m Delta^2 = v2 - m omega^2. Throws on a negative radicand.
double fga_error_lowest_order(const PotentialDerivatives& d, double dq, double mass,
                              double omega, double hbar);

/// Width with m Delta^2 = 0 at the given center: dq = sqrt(hbar/(2 m w)),
/// w = sqrt(V''(q0)/m). The potential curvature is read off the table.
double match_width(const HamiltonianSpec& h, double q0, double mass, double hbar);

/// Prescribed width schedules for guided-width runs.
class WidthSchedule {
 public:
  static WidthSchedule constant(double dq0);
  static WidthSchedule linear(double dq0, double rate);
  static WidthSchedule sinusoidal(double dq0, double amplitude, double rate);
  double dq(double t) const;
  double dq_dot(double t) const;

 private:
  enum class Kind { constant, linear, sinusoidal } kind_ = Kind::constant;
  double dq0_ = 1.0, a_ = 0.0, b_ = 0.0;
};

struct FgaRun {
  std::vector<double> times;
  std::vector<CoherentState> states;
  std::vector<ErrorReport> reports;
};

/// Pure-variational propagation of (z, theta) with per-sample diagnostics.
FgaRun propagate(const HamiltonianSpec& h, CoherentState s0, double t_final, int n_samples,
                 const OdeOptions& opts = {});

/// Guided-width propagation: dq follows the schedule, (z, theta) stay
/// variational via the instantaneous minimum-distance condition. Reports are
/// the guided diagnostics (energy drift, drift bound, partial stationarity).
FgaRun propagate_guided(const HamiltonianSpec& h, CoherentState s0,
                        const WidthSchedule& schedule, double t_final, int n_samples,
                        const OdeOptions& opts = {});

/// Variational rates at fixed manifold data, solved from the 3-parameter
/// least-squares problem; used by the guided path and as an independent
/// cross-check of fga_rhs / theta_rate.
struct VariationalRates {
  cdouble zdot;
  double theta_dot;
  WaveState psidot_var;     ///< in-tangent part of the derivative
  WaveState psidot_guided;  ///< width-schedule part (zero for frozen width)
};
VariationalRates variational_rates(const HamiltonianSpec& h, const CoherentState& s,
                                   double dq_dot);

}  // namespace vqd::fga

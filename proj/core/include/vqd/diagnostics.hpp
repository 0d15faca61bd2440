#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vqd/hamiltonian.hpp"

namespace vqd {

/// Per-sample local-in-time error diagnostics of a variational trajectory.
///
/// `eps` is the variance-form rate sqrt(var_E/hbar^2 - ||psidot_plus||^2),
/// `eps_direct` the residual-form rate ||i hbar psidot - H psi|| / hbar with
/// the derivative taken in the gauge of the exact solution. The two agree
/// only when psidot is a true stationary point of the minimum-distance
/// problem; a mismatch beyond tolerance clears `stationarity_ok` instead of
/// being silently absorbed.
struct ErrorReport {
  double t = 0.0;
  double hbar = 1.0;
  double eps = 0.0;
  double eps_direct = 0.0;
  double r_index = 1.0;
  double e_bar = 0.0;
  double var_e = 0.0;
  double deriv_norm_sq = 0.0;  ///< ||psidot_plus||^2, (1/time)^2
  double bound_accum = 0.0;    ///< cumulative integral of eps
  bool stationary = false;     ///< var_E ~ 0: eigenstate input
  bool stationarity_ok = true;

  bool guided = false;
  double residual_guided = 0.0;  ///< ||H psi - i hbar psidot_guided|| / hbar
  double energy_drift = 0.0;     ///< W0 = dE/dt
  double drift_bound = 0.0;      ///< 2 hbar eps ||psidot_guided||
  double guided_norm = 0.0;      ///< ||psidot_guided||
};

/// Projects the derivative onto the orthogonal complement of psi. When the
/// input satisfies the variational gauge condition i hbar <psi|psidot> =
/// <psi|H|psi>, the result equals psidot + (i e_bar / hbar) psi; the
/// projection form also removes any stray norm-changing component, so
/// <psi|result> = 0 holds exactly either way.
WaveState standard_gauge_derivative(const WaveState& psi, const WaveState& psidot,
                                    double e_bar);

/// Full diagnostics for one sample: variance form, residual form, r-index,
/// stationarity verdicts. `psidot` may arrive in any gauge; the correction is
/// centralized here.
ErrorReport local_error(const HamiltonianSpec& h, const WaveState& psi,
                        const WaveState& psidot);

/// r = hbar ||psidot_plus|| / Delta_E, in [0, 1]. Empty when var_e = 0
/// (stationary state: r undefined, eps = 0).
std::optional<double> r_index(double var_e, double deriv_norm_sq, double hbar);

struct RelevantSplit {
  WaveState psi_perp;
  double delta_e = 0.0;
};

/// H psi = e_bar psi + delta_e psi_perp with <psi|psi_perp> = 0 and
/// ||psi_perp|| = 1. Empty when the state is stationary (delta_e ~ 0).
std::optional<RelevantSplit> relevant_split(const HamiltonianSpec& h, const WaveState& psi);

/// Cumulative trapezoid integral of eps over the report times. Fills
/// bound_accum in place and returns the sequence. Times must be
/// non-decreasing.
std::vector<double> accumulate_bound(std::vector<ErrorReport>& reports);

/// Local error for a time-dependent manifold whose derivative splits into a
/// variational part (in the instantaneous tangent space) and a guided part.
/// Also records the energy drift W0 and its bound.
ErrorReport guided_error(const HamiltonianSpec& h, const WaveState& psi,
                         const WaveState& psidot_var, const WaveState& psidot_guided);

/// Columns: t,eps,r,E_bar,var_E,deriv_norm_sq,bound_accum,eps_direct,
/// stationarity_flag[,residual_guided,energy_drift,drift_bound].
void write_reports_csv(const std::vector<ErrorReport>& reports, const std::string& path);

/// hbar ||psidot|| <= ||H psi|| within slack, evaluated from report fields.
bool boundedness_holds(const ErrorReport& r, double slack = 1e-9);

}  // namespace vqd

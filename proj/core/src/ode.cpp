#include "vqd/ode.hpp"

#include <boost/numeric/odeint.hpp>

#include "vqd/errors.hpp"

namespace vqd {

void integrate_sampled(const OdeSystem& f, std::vector<double>& y,
                       const std::vector<double>& times, const OdeOptions& opts,
                       const OdeObserver& observer) {
  namespace ode = boost::numeric::odeint;
  if (times.empty()) throw StructuralError("integrate_sampled needs at least one time");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw StructuralError("integrate_sampled needs strictly increasing times");
    }
  }
  using state_type = std::vector<double>;
  auto stepper =
      ode::make_controlled<ode::runge_kutta_dopri5<state_type>>(opts.abs_tol, opts.rel_tol);
  ode::integrate_times(stepper, f, y, times.begin(), times.end(), opts.initial_dt, observer);
}

}  // namespace vqd

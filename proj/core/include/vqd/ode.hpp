#pragma once

#include <functional>
#include <vector>

namespace vqd {

struct OdeOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double initial_dt = 1e-4;
};

using OdeSystem =
    std::function<void(const std::vector<double>&, std::vector<double>&, double)>;
using OdeObserver = std::function<void(const std::vector<double>&, double)>;

/// Adaptive Dormand-Prince 5(4) integration of dy/dt = f(y, t), landing
/// exactly on each requested time and invoking the observer there. Times
/// must be increasing; the first entry is the initial time.
void integrate_sampled(const OdeSystem& f, std::vector<double>& y,
                       const std::vector<double>& times, const OdeOptions& opts,
                       const OdeObserver& observer);

}  // namespace vqd

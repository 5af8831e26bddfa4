#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace repcnn {

/// Central finite differences (f(x+h) - f(x-h)) / 2h against an analytic
/// gradient. Returns the max relative error over all coordinates; the
/// denominator is floored so zero gradients do not blow up the ratio.
inline double finite_difference_check(const std::function<double(const std::vector<float>&)>& f,
                                      std::vector<float> point,
                                      const std::vector<float>& analytic_grad, float step,
                                      double denom_floor = 1e-3) {
    double worst = 0.0;
    for (std::size_t i = 0; i < point.size(); ++i) {
        const float orig = point[i];
        const float xp = orig + step;
        const float xm = orig - step;
        point[i] = xp;
        const double fp = f(point);
        point[i] = xm;
        const double fm = f(point);
        point[i] = orig;
        // divide by the realized float step, not the nominal one
        const double fd = (fp - fm) / (static_cast<double>(xp) - static_cast<double>(xm));
        const double an = analytic_grad[i];
        const double denom = std::max({std::fabs(fd), std::fabs(an), denom_floor});
        worst = std::max(worst, std::fabs(fd - an) / denom);
    }
    return worst;
}

}  // namespace repcnn

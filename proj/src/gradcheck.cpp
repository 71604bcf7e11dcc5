#include "transatt/gradcheck.hpp"

#include "transatt/error.hpp"

#include <cmath>

namespace transatt {

GradCheckResult grad_check(const std::function<double()>& loss,
                           std::span<GradCheckItem> items, double fd_step) {
    GradCheckResult result;
    for (GradCheckItem& item : items) {
        if (item.value.size() != item.grad.size())
            fail_config("grad_check: item '" + item.name + "' value/grad size mismatch");
        for (std::size_t k = 0; k < item.value.size(); ++k) {
            double saved = item.value[k];
            item.value[k] = saved + fd_step;
            double up = loss();
            item.value[k] = saved - fd_step;
            double down = loss();
            item.value[k] = saved;
            if (!std::isfinite(up) || !std::isfinite(down))
                fail_numeric("grad_check: non-finite loss while perturbing " + item.name);
            double numeric = (up - down) / (2.0 * fd_step);
            double analytic = item.grad[k];
            double denom = std::max(1e-8, std::fabs(analytic) + std::fabs(numeric));
            double rel = std::fabs(analytic - numeric) / denom;
            if (rel > result.max_rel_err) {
                result.max_rel_err = rel;
                result.worst = item.name + "[" + std::to_string(k) + "]";
            }
        }
    }
    return result;
}

} // namespace transatt

#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gridvqa/params.hpp"

namespace gridvqa {

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t coordinates = 0;
};

// Gradients below this magnitude are compared on an absolute scale.
inline constexpr double kGradCheckFloor = 1e-6;

/// Compares analytic gradients against central finite differences.
///
/// `loss_fn(true)` must evaluate the loss and accumulate gradients into every
/// parameter in `params`; `loss_fn(false)` only evaluates the loss. The loss
/// must be a deterministic function of the parameters (reseed any dropout
/// generator inside `loss_fn`).
inline GradCheckResult grad_check(const std::function<double(bool)>& loss_fn,
                                  const std::vector<ParamRef<double>>& params, double step = 1e-5) {
    zero_grads(params);
    const double base = loss_fn(true);
    if (!std::isfinite(base)) throw NumericError("grad_check: non-finite loss");

    GradCheckResult res;
    auto probe = [&](const std::string& name, Tensor<double>& value, const Tensor<double>& grad) {
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double orig = value[i];
            value[i] = orig + step;
            const double up = loss_fn(false);
            value[i] = orig - step;
            const double down = loss_fn(false);
            value[i] = orig;
            if (!std::isfinite(up) || !std::isfinite(down)) {
                throw NumericError("grad_check: non-finite loss probing " + name + "[" +
                                   std::to_string(i) + "]");
            }
            const double numeric = (up - down) / (2.0 * step);
            const double analytic = grad[i];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
            const double rel = std::abs(analytic - numeric) / denom;
            ++res.coordinates;
            if (rel > res.max_relative_error) {
                res.max_relative_error = rel;
                res.worst_param = name;
                res.worst_index = i;
                res.worst_analytic = analytic;
                res.worst_numeric = numeric;
            }
        }
    };
    for (const auto& p : params) {
        probe(p.name + ".weight", p.params->weight, p.params->grad_weight);
        probe(p.name + ".bias", p.params->bias, p.params->grad_bias);
    }
    return res;
}

}  // namespace gridvqa

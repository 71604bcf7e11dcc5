#pragma once

#include "transatt/tensor.hpp"

#include <functional>
#include <string>

namespace transatt {

// One checked tensor: a mutable view of the live parameter values plus the
// analytic gradient the implementation produced for them.
struct GradCheckItem {
    std::span<double> value;
    std::span<const double> grad;
    std::string name;

    GradCheckItem(std::span<double> v, std::span<const double> g, std::string n)
        : value(v), grad(g), name(std::move(n)) {}
    GradCheckItem(Mat& v, const Mat& g, std::string n)
        : value(v.a), grad(g.a), name(std::move(n)) {}
};

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst; // "tensor[index]"
};

// Central finite differences against the analytic gradients. `loss` must be a
// deterministic function of the values referenced by `items`; it is
// re-evaluated with each scalar perturbed by +/- fd_step. Relative error per
// scalar is |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
GradCheckResult grad_check(const std::function<double()>& loss,
                           std::span<GradCheckItem> items, double fd_step);

} // namespace transatt

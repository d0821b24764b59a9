#pragma once

#include "laneid/numerics/autodiff.hpp"

#include <functional>
#include <span>
#include <vector>

namespace laneid::num {

/// Builds a scalar loss graph from gradient-tracking leaves (one per parameter tensor).
using LossFn = std::function<Var(std::span<const Var>)>;

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t worst_tensor = 0;
    std::size_t worst_index = 0;
    bool finite = true;

    bool passed(double tolerance) const { return finite && max_relative_error < tolerance; }
};

std::vector<Tensor> analytic_gradients(const LossFn& loss, std::span<const Tensor> params);

/// Central differences (f(p+eps) - f(p-eps)) / (2 eps), one coordinate at a time.
/// Writes false to *finite when any loss evaluation is non-finite.
std::vector<Tensor> numeric_gradients(const LossFn& loss, std::span<const Tensor> params, double eps,
                                      bool* finite = nullptr);

/// Max over coordinates of |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport compare_gradients(std::span<const Tensor> analytic, std::span<const Tensor> numeric);

GradCheckReport grad_check(const LossFn& loss, std::span<const Tensor> params, double eps);

} // namespace laneid::num

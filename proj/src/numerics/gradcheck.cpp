#include "laneid/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace laneid::num {

namespace {

std::vector<Var> constants(std::span<const Tensor> params) {
    std::vector<Var> vars;
    vars.reserve(params.size());
    for (const auto& p : params) vars.push_back(Var::constant(p));
    return vars;
}

} // namespace

std::vector<Tensor> analytic_gradients(const LossFn& loss, std::span<const Tensor> params) {
    std::vector<Var> leaves;
    leaves.reserve(params.size());
    for (const auto& p : params) leaves.push_back(Var::leaf(p));
    Var out = loss(leaves);
    backward(out);
    std::vector<Tensor> grads;
    grads.reserve(leaves.size());
    for (const auto& l : leaves) grads.push_back(l.grad());
    return grads;
}

std::vector<Tensor> numeric_gradients(const LossFn& loss, std::span<const Tensor> params, double eps, bool* finite) {
    if (!(eps > 0.0)) throw std::invalid_argument("numeric_gradients: eps must be positive");
    if (finite) *finite = true;
    std::vector<Var> vars = constants(params);
    std::vector<Tensor> grads;
    for (std::size_t t = 0; t < params.size(); ++t) {
        Tensor g(params[t].shape(), 0.0);
        Tensor probe = params[t];
        for (std::size_t i = 0; i < probe.size(); ++i) {
            const double original = probe[i];
            probe[i] = original + eps;
            vars[t] = Var::constant(probe);
            const double up = loss(vars).value().item();
            probe[i] = original - eps;
            vars[t] = Var::constant(probe);
            const double down = loss(vars).value().item();
            probe[i] = original;
            if (!std::isfinite(up) || !std::isfinite(down)) {
                if (finite) *finite = false;
                g[i] = std::numeric_limits<double>::quiet_NaN();
            } else {
                g[i] = (up - down) / (2.0 * eps);
            }
        }
        vars[t] = Var::constant(params[t]);
        grads.push_back(std::move(g));
    }
    return grads;
}

GradCheckReport compare_gradients(std::span<const Tensor> analytic, std::span<const Tensor> numeric) {
    if (analytic.size() != numeric.size()) throw std::invalid_argument("compare_gradients: tensor count mismatch");
    GradCheckReport report;
    for (std::size_t t = 0; t < analytic.size(); ++t) {
        require_same_shape(analytic[t], numeric[t], "compare_gradients");
        for (std::size_t i = 0; i < analytic[t].size(); ++i) {
            const double a = analytic[t][i];
            const double n = numeric[t][i];
            if (!std::isfinite(a) || !std::isfinite(n)) {
                report.finite = false;
                continue;
            }
            const double denom = std::max({std::fabs(a), std::fabs(n), 1e-8});
            const double err = std::fabs(a - n) / denom;
            if (err > report.max_relative_error) {
                report.max_relative_error = err;
                report.worst_tensor = t;
                report.worst_index = i;
            }
        }
    }
    return report;
}

GradCheckReport grad_check(const LossFn& loss, std::span<const Tensor> params, double eps) {
    const Var base = loss(constants(params));
    if (!base.value().all_finite()) {
        GradCheckReport failed;
        failed.finite = false;
        return failed;
    }
    auto analytic = analytic_gradients(loss, params);
    bool finite = true;
    auto numeric = numeric_gradients(loss, params, eps, &finite);
    auto report = compare_gradients(analytic, numeric);
    report.finite = report.finite && finite;
    return report;
}

} // namespace laneid::num

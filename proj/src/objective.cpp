#include "laneid/objective.hpp"

#include "laneid/numerics/ops.hpp"

#include <cmath>
#include <stdexcept>

namespace laneid::objective {

using num::Tensor;
using num::Var;

namespace {

void require_one_hot(const Tensor& y) {
    std::size_t ones = 0;
    for (double v : y.data()) {
        if (v == 1.0) ++ones;
        else if (v != 0.0) throw std::invalid_argument("cross_entropy: target is not one-hot");
    }
    if (ones != 1) throw std::invalid_argument("cross_entropy: target is not one-hot");
}

Tensor id_weights(std::size_t n) {
    Tensor w({n});
    for (std::size_t k = 0; k < n; ++k) w[k] = static_cast<double>(k + 1);
    return w;
}

} // namespace

Var cross_entropy(const Var& p, const Tensor& y) {
    num::require_same_shape(p.value(), y, "cross_entropy");
    require_one_hot(y);
    return num::scale(num::dot_constant(num::log_clamped(p, kLogFloor), y), -1.0);
}

double cross_entropy(const Tensor& p, const Tensor& y) { return cross_entropy(Var::constant(p), y).value().item(); }

double adaptive_weight(double z) { return 1.0 + std::exp(-5.0 * z); }

std::size_t argmax(const Tensor& p) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.size(); ++i)
        if (p[i] > p[best]) best = i;
    return best;
}

Var expected_id(const Var& p) { return num::dot_constant(p, id_weights(p.value().size())); }

double scalar_estimate(const Tensor& p, EstimateMode mode) {
    if (mode == EstimateMode::Argmax) return static_cast<double>(argmax(p) + 1);
    return expected_id(Var::constant(p)).value().item();
}

Tensor one_hot(int id, std::size_t classes) {
    Tensor y({classes}, 0.0);
    const std::size_t idx = class_index(id);
    if (idx >= classes) throw LabelError("lane ID " + std::to_string(id) + " exceeds class count");
    y[idx] = 1.0;
    return y;
}

Loss total_loss(const model::FrameOutput& output, const LaneLabel& label, const LossOptions& options) {
    label.validate();
    const std::size_t n = output.left.value().size();
    const Var ce_l = cross_entropy(output.left, one_hot(label.delta_l, n));
    const Var ce_r = cross_entropy(output.right, one_hot(label.delta_r, n));
    const Var ce_c = cross_entropy(output.count, one_hot(label.lane_count, n));

    LossBreakdown b;
    b.w_left = adaptive_weight(scalar_estimate(output.left.value(), EstimateMode::Argmax) + options.z_offset);
    b.w_right = adaptive_weight(scalar_estimate(output.right.value(), EstimateMode::Argmax) + options.z_offset);

    // residual = s_r - s_c + s_l - 1 over expected IDs.
    const Var s_l = expected_id(output.left);
    const Var s_r = expected_id(output.right);
    const Var s_c = expected_id(output.count);
    const Var residual = num::add_constant(num::add(num::sub(s_r, s_c), s_l), -1.0);
    const Var constraint = num::abs(residual);

    const Var total = num::add(num::add(num::add(num::scale(ce_l, b.w_left), num::scale(ce_r, b.w_right)), ce_c),
                               constraint);
    b.ce_left = ce_l.value().item();
    b.ce_right = ce_r.value().item();
    b.ce_count = ce_c.value().item();
    b.constraint = constraint.value().item();
    b.total = total.value().item();
    return {total, b};
}

LossBreakdown total_loss(const model::ModelOutput& output, const LaneLabel& label, const LossOptions& options) {
    const model::FrameOutput f{Var::constant(output.left), Var::constant(output.right), Var::constant(output.count)};
    return total_loss(f, label, options).breakdown;
}

} // namespace laneid::objective

#pragma once

#include "laneid/conventions.hpp"
#include "laneid/model.hpp"
#include "laneid/numerics/autodiff.hpp"

namespace laneid::objective {

inline constexpr double kLogFloor = 1e-12;

enum class EstimateMode { Expectation, Argmax };

struct LossBreakdown {
    double ce_left = 0.0;
    double ce_right = 0.0;
    double ce_count = 0.0;
    double w_left = 1.0;
    double w_right = 1.0;
    double constraint = 0.0;
    double total = 0.0;
};

struct LossOptions {
    /// Added to the argmax ID before the adaptive weight; 0 applies the weight to the 1-based ID as is.
    double z_offset = 0.0;
};

/// -sum y_i log(max(p_i, 1e-12)). Throws std::invalid_argument unless y is one-hot.
double cross_entropy(const num::Tensor& p, const num::Tensor& y);
num::Var cross_entropy(const num::Var& p, const num::Tensor& y);

/// 1 + exp(-5 z), used as a constant multiplier.
double adaptive_weight(double z);

/// Expectation: sum (k+1) p_k. Argmax: 1 + index of the largest entry, ties to the lower index.
double scalar_estimate(const num::Tensor& p, EstimateMode mode);
num::Var expected_id(const num::Var& p);
std::size_t argmax(const num::Tensor& p);

num::Tensor one_hot(int id, std::size_t classes);

/// Composite loss over one frame: adaptive-weighted cross-entropy of both
/// ID heads, cross-entropy of the count head, and the absolute triangular
/// residual of the expected IDs and count.
struct Loss {
    num::Var total;
    LossBreakdown breakdown;
};

Loss total_loss(const model::FrameOutput& output, const LaneLabel& label, const LossOptions& options = {});
LossBreakdown total_loss(const model::ModelOutput& output, const LaneLabel& label, const LossOptions& options = {});

} // namespace laneid::objective

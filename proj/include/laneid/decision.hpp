#pragma once

#include "laneid/conventions.hpp"
#include "laneid/numerics/tensor.hpp"

#include <array>
#include <optional>
#include <string>
#include <utility>

namespace laneid::decision {

/// Confidence scores over a probability vector; higher means more confident.
enum class Criterion { Max, MaxMinusMean, Entropy, MaxMinusEntropy, ZScore };

inline constexpr std::array<Criterion, 5> kAllCriteria{Criterion::Max, Criterion::MaxMinusMean, Criterion::Entropy,
                                                       Criterion::MaxMinusEntropy, Criterion::ZScore};

/// CLI names: max, max-m, e, max-e, z-score.
std::string to_string(Criterion c);
Criterion criterion_from_string(const std::string& name);

/// Direction of the plain entropy criterion. Negated scores -H(p) so that
/// sharper vectors win; Raw scores +H(p).
enum class EntropySign { Negated, Raw };

struct DecisionState {
    std::optional<int> left;
    std::optional<int> right;
};

struct FinalEstimate {
    Convention convention = Convention::Left;
    int lane_id = 1;
    int lane_count = 1;
    /// The other convention's ID implied by lane_id and lane_count, clamped to 1..8.
    int companion_id = 1;
    double score_left = 0.0;
    double score_right = 0.0;
    // Argmax IDs of both heads before any weighting.
    int raw_left = 1;
    int raw_right = 1;
};

double entropy(const num::Tensor& p);
double criterion_score(const num::Tensor& p, Criterion criterion, EntropySign sign = EntropySign::Negated);

/// 1 / (1 + |o_t - o_prev|), or 1 without a previous output.
double temporal_penalty(int o_t, std::optional<int> o_prev);

/// Picks one convention per frame: each head's argmax ID is scored by the
/// criterion times the temporal penalty against that convention's previous
/// argmax; Left wins ties. The returned state records both raw argmaxes.
std::pair<FinalEstimate, DecisionState> decide(const num::Tensor& left, const num::Tensor& right,
                                               const num::Tensor& count, const DecisionState& state,
                                               Criterion criterion, EntropySign sign = EntropySign::Negated);

} // namespace laneid::decision

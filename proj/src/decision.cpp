#include "laneid/decision.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace laneid::decision {

std::string to_string(Criterion c) {
    switch (c) {
    case Criterion::Max: return "max";
    case Criterion::MaxMinusMean: return "max-m";
    case Criterion::Entropy: return "e";
    case Criterion::MaxMinusEntropy: return "max-e";
    case Criterion::ZScore: return "z-score";
    }
    return "unknown";
}

Criterion criterion_from_string(const std::string& name) {
    for (Criterion c : kAllCriteria)
        if (to_string(c) == name) return c;
    throw std::invalid_argument("unknown decision criterion '" + name + "' (expected max, max-m, e, max-e, z-score)");
}

namespace {

std::size_t first_argmax(const num::Tensor& p) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.size(); ++i)
        if (p[i] > p[best]) best = i;
    return best;
}

double mean_of(const num::Tensor& p) {
    double s = 0.0;
    for (double v : p.data()) s += v;
    return s / static_cast<double>(p.size());
}

} // namespace

double entropy(const num::Tensor& p) {
    double h = 0.0;
    for (double v : p.data()) h -= v * std::log(std::max(v, 1e-12));
    return h;
}

double criterion_score(const num::Tensor& p, Criterion criterion, EntropySign sign) {
    if (p.empty()) throw std::invalid_argument("criterion_score: empty vector");
    const double max = p[first_argmax(p)];
    switch (criterion) {
    case Criterion::Max: return max;
    case Criterion::MaxMinusMean: return max - mean_of(p);
    case Criterion::Entropy: return sign == EntropySign::Negated ? -entropy(p) : entropy(p);
    case Criterion::MaxMinusEntropy: return max - entropy(p);
    case Criterion::ZScore: {
        const double mean = mean_of(p);
        double var = 0.0;
        for (double v : p.data()) var += (v - mean) * (v - mean);
        const double std = std::sqrt(var / static_cast<double>(p.size()));
        return (max - mean) / std::max(std, 1e-12);
    }
    }
    throw std::invalid_argument("unknown criterion");
}

double temporal_penalty(int o_t, std::optional<int> o_prev) {
    if (!o_prev) return 1.0;
    return 1.0 / (1.0 + std::abs(o_t - *o_prev));
}

std::pair<FinalEstimate, DecisionState> decide(const num::Tensor& left, const num::Tensor& right,
                                               const num::Tensor& count, const DecisionState& state,
                                               Criterion criterion, EntropySign sign) {
    FinalEstimate est;
    est.raw_left = static_cast<int>(first_argmax(left)) + 1;
    est.raw_right = static_cast<int>(first_argmax(right)) + 1;
    est.lane_count = static_cast<int>(first_argmax(count)) + 1;
    est.score_left = temporal_penalty(est.raw_left, state.left) * criterion_score(left, criterion, sign);
    est.score_right = temporal_penalty(est.raw_right, state.right) * criterion_score(right, criterion, sign);
    est.convention = est.score_left >= est.score_right ? Convention::Left : Convention::Right;
    est.lane_id = est.convention == Convention::Left ? est.raw_left : est.raw_right;
    est.companion_id = std::clamp(est.lane_count - est.lane_id + 1, 1, kMaxLanes);
    return {est, DecisionState{est.raw_left, est.raw_right}};
}

} // namespace laneid::decision

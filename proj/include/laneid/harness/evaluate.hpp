#pragma once

#include "laneid/brightness.hpp"
#include "laneid/dataset.hpp"
#include "laneid/decision.hpp"
#include "laneid/harness/checkpoint.hpp"
#include "laneid/model.hpp"

#include <json.hpp>

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace laneid::harness {

/// Exact per-frame counts. Raw correctness means at least one of the two
/// convention heads has the right argmax; final correctness means the
/// convention picked by the decision module has the right argmax.
struct Metrics {
    std::size_t frames = 0;
    std::size_t raw_correct = 0;
    std::size_t final_correct = 0;
    std::size_t left_correct = 0;
    std::size_t right_correct = 0;
    std::size_t count_correct = 0;
    /// [head: left, right, count][true class][predicted class]
    std::array<std::array<std::array<std::size_t, 8>, 8>, 3> confusion{};

    double raw_combined() const { return ratio(raw_correct); }
    double final_accuracy() const { return ratio(final_correct); }
    double left_only() const { return ratio(left_correct); }
    double right_only() const { return ratio(right_correct); }
    double count_accuracy() const { return ratio(count_correct); }

    /// raw >= final and raw >= max(left, right), on the counts.
    bool invariants_hold() const;
    void merge(const Metrics& other);
    nlohmann::json to_json() const;

    bool operator==(const Metrics&) const = default;

private:
    double ratio(std::size_t n) const { return frames ? static_cast<double>(n) / static_cast<double>(frames) : 0.0; }
};

/// Anything that maps a stream of frames to head probabilities.
class FramePredictor {
public:
    virtual ~FramePredictor() = default;
    virtual void reset() = 0;
    virtual model::ModelOutput predict(const Image& frame) = 0;
};

using PredictorFactory = std::function<std::unique_ptr<FramePredictor>()>;

class ModelPredictor final : public FramePredictor {
public:
    ModelPredictor(model::ModelConfig config, const num::ParameterSet& params);
    void reset() override;
    model::ModelOutput predict(const Image& frame) override;

private:
    model::Moka net_;
    std::vector<num::Var> params_;
    model::RecurrentState state_;
};

/// Factory sharing one checkpoint across workers. Throws std::invalid_argument
/// if the checkpoint's input size differs from the corpus frames.
PredictorFactory model_predictor(const Checkpoint& ckpt, const Corpus& corpus);

struct FrameRecord {
    std::string sequence;
    int frame = 0;
    LaneLabel label;
    decision::FinalEstimate estimate;
    bool adjusted = false;
};

struct EvalOptions {
    brightness::BrightnessConfig brightness = brightness::BrightnessConfig::disabled();
    decision::Criterion criterion = decision::Criterion::MaxMinusMean;
    decision::EntropySign entropy_sign = decision::EntropySign::Negated;
};

/// Streams every sequence once (fresh model state, tracker and decision
/// state per sequence) and scores the decision module under each criterion.
/// Sequences run in parallel on worker_count() workers; results do not depend
/// on the worker count.
std::vector<Metrics> evaluate_criteria(const Corpus& corpus, const PredictorFactory& factory,
                                       const brightness::BrightnessConfig& brightness,
                                       std::span<const decision::Criterion> criteria,
                                       decision::EntropySign sign = decision::EntropySign::Negated,
                                       std::vector<FrameRecord>* records = nullptr);

Metrics evaluate(const Corpus& corpus, const PredictorFactory& factory, const EvalOptions& options,
                 std::vector<FrameRecord>* records = nullptr);
Metrics evaluate(const Checkpoint& ckpt, const Corpus& corpus, const EvalOptions& options,
                 std::vector<FrameRecord>* records = nullptr);

nlohmann::json to_json(const FrameRecord& r);

} // namespace laneid::harness

#include "laneid/harness/evaluate.hpp"

#include "laneid/harness/config.hpp"
#include "laneid/objective.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace laneid::harness {

bool Metrics::invariants_hold() const {
    return raw_correct >= final_correct && raw_correct >= std::max(left_correct, right_correct);
}

void Metrics::merge(const Metrics& o) {
    frames += o.frames;
    raw_correct += o.raw_correct;
    final_correct += o.final_correct;
    left_correct += o.left_correct;
    right_correct += o.right_correct;
    count_correct += o.count_correct;
    for (std::size_t h = 0; h < 3; ++h)
        for (std::size_t t = 0; t < 8; ++t)
            for (std::size_t p = 0; p < 8; ++p) confusion[h][t][p] += o.confusion[h][t][p];
}

nlohmann::json Metrics::to_json() const {
    return {{"frames", frames},
            {"raw_combined", raw_combined()},
            {"final", final_accuracy()},
            {"left_only", left_only()},
            {"right_only", right_only()},
            {"count_accuracy", count_accuracy()},
            {"counts",
             {{"raw", raw_correct},
              {"final", final_correct},
              {"left", left_correct},
              {"right", right_correct},
              {"count", count_correct}}},
            {"confusion", {{"left", confusion[0]}, {"right", confusion[1]}, {"count", confusion[2]}}}};
}

ModelPredictor::ModelPredictor(model::ModelConfig config, const num::ParameterSet& params)
    : net_(std::move(config)), params_(model::constant_params(params)), state_(net_.reset_state()) {
    net_.check_params(params);
}

void ModelPredictor::reset() { state_ = net_.reset_state(); }

model::ModelOutput ModelPredictor::predict(const Image& frame) { return net_.infer(params_, state_, to_tensor(frame)); }

PredictorFactory model_predictor(const Checkpoint& ckpt, const Corpus& corpus) {
    if (ckpt.config.height != corpus.manifest.height || ckpt.config.width != corpus.manifest.width) {
        throw std::invalid_argument("checkpoint expects " + std::to_string(ckpt.config.height) + "x" +
                                    std::to_string(ckpt.config.width) + " frames, corpus has " +
                                    std::to_string(corpus.manifest.height) + "x" +
                                    std::to_string(corpus.manifest.width));
    }
    return [&ckpt] { return std::make_unique<ModelPredictor>(ckpt.config, ckpt.params); };
}

namespace {

struct SequenceResult {
    std::vector<Metrics> metrics;
    std::vector<FrameRecord> records;
};

SequenceResult run_sequence(const Sequence& seq, FramePredictor& predictor,
                            const brightness::BrightnessConfig& bcfg, std::span<const decision::Criterion> criteria,
                            decision::EntropySign sign, bool keep_records) {
    SequenceResult out;
    out.metrics.resize(criteria.size());
    predictor.reset();
    brightness::BrightnessTracker tracker(bcfg);
    std::vector<decision::DecisionState> states(criteria.size());

    for (std::size_t f = 0; f < seq.frames.size(); ++f) {
        const auto adj = brightness::adjust(seq.frames[f], tracker);
        const model::ModelOutput probs = predictor.predict(adj.image);
        const LaneLabel& truth = seq.labels[f];
        const int left = static_cast<int>(objective::argmax(probs.left)) + 1;
        const int right = static_cast<int>(objective::argmax(probs.right)) + 1;
        const int count = static_cast<int>(objective::argmax(probs.count)) + 1;
        const bool left_ok = left == truth.delta_l;
        const bool right_ok = right == truth.delta_r;

        for (std::size_t c = 0; c < criteria.size(); ++c) {
            auto [est, next] = decision::decide(probs.left, probs.right, probs.count, states[c], criteria[c], sign);
            states[c] = next;
            Metrics& m = out.metrics[c];
            ++m.frames;
            m.raw_correct += (left_ok || right_ok) ? 1 : 0;
            m.left_correct += left_ok ? 1 : 0;
            m.right_correct += right_ok ? 1 : 0;
            m.count_correct += count == truth.lane_count ? 1 : 0;
            m.final_correct += est.lane_id == truth.id(est.convention) ? 1 : 0;
            m.confusion[0][class_index(truth.delta_l)][static_cast<std::size_t>(left - 1)]++;
            m.confusion[1][class_index(truth.delta_r)][static_cast<std::size_t>(right - 1)]++;
            m.confusion[2][class_index(truth.lane_count)][static_cast<std::size_t>(count - 1)]++;
            if (keep_records && c == 0) {
                out.records.push_back({seq.id, static_cast<int>(f), truth, est, adj.adjusted});
            }
        }
    }
    return out;
}

} // namespace

std::vector<Metrics> evaluate_criteria(const Corpus& corpus, const PredictorFactory& factory,
                                       const brightness::BrightnessConfig& bcfg,
                                       std::span<const decision::Criterion> criteria, decision::EntropySign sign,
                                       std::vector<FrameRecord>* records) {
    if (criteria.empty()) throw std::invalid_argument("evaluate: no decision criteria");
    const std::size_t n = corpus.sequences.size();
    std::vector<SequenceResult> results(n);
    const unsigned workers = std::max(1u, std::min<unsigned>(worker_count(), static_cast<unsigned>(std::max<std::size_t>(n, 1))));

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        try {
            auto predictor = factory();
            for (std::size_t i = next++; i < n; i = next++) {
                results[i] = run_sequence(corpus.sequences[i], *predictor, bcfg, criteria, sign, records != nullptr);
            }
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = n;
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<Metrics> total(criteria.size());
    for (auto& r : results) {
        for (std::size_t c = 0; c < criteria.size(); ++c) total[c].merge(r.metrics[c]);
        if (records) records->insert(records->end(), r.records.begin(), r.records.end());
    }
    return total;
}

Metrics evaluate(const Corpus& corpus, const PredictorFactory& factory, const EvalOptions& options,
                 std::vector<FrameRecord>* records) {
    const decision::Criterion criteria[] = {options.criterion};
    return evaluate_criteria(corpus, factory, options.brightness, criteria, options.entropy_sign, records).front();
}

Metrics evaluate(const Checkpoint& ckpt, const Corpus& corpus, const EvalOptions& options,
                 std::vector<FrameRecord>* records) {
    return evaluate(corpus, model_predictor(ckpt, corpus), options, records);
}

nlohmann::json to_json(const FrameRecord& r) {
    return {{"sequence", r.sequence},
            {"frame", r.frame},
            {"convention", std::string(to_string(r.estimate.convention))},
            {"lane_id", r.estimate.lane_id},
            {"lane_count", r.estimate.lane_count},
            {"companion_id", r.estimate.companion_id},
            {"scores", {{"left", r.estimate.score_left}, {"right", r.estimate.score_right}}},
            {"raw", {{"left", r.estimate.raw_left}, {"right", r.estimate.raw_right}}},
            {"brightness_adjusted", r.adjusted}};
}

} // namespace laneid::harness

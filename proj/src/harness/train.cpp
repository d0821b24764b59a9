#include "laneid/harness/train.hpp"

#include "laneid/harness/augment.hpp"
#include "laneid/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <ostream>
#include <thread>

namespace laneid::harness {

using num::Var;

namespace {

struct ClipResult {
    double loss = 0.0;
    std::vector<Var> leaves;
};

ClipResult clip_loss_and_grad(const model::Moka& net, const num::ParameterSet& params, const Clip& clip,
                              const objective::LossOptions& loss_options, double scale) {
    ClipResult r;
    r.leaves = params.bind();
    model::RecurrentState state = net.reset_state();
    Var total;
    for (std::size_t f = 0; f < clip.frames.size(); ++f) {
        auto [out, next] = net.forward_frame(r.leaves, state, Var::constant(to_tensor(clip.frames[f])));
        state = std::move(next);
        const Var frame_loss = objective::total_loss(out, clip.labels[f], loss_options).total;
        total = total.valid() ? num::add(total, frame_loss) : frame_loss;
    }
    const Var scaled = num::scale(total, scale);
    r.loss = scaled.value().item();
    num::backward(scaled);
    return r;
}

} // namespace

double batch_loss_and_grad(const model::Moka& net, num::ParameterSet& params, const std::vector<Clip>& batch,
                           const objective::LossOptions& loss_options) {
    params.zero_grad();
    std::size_t frames = 0;
    for (const auto& c : batch) frames += c.frames.size();
    if (frames == 0) throw std::invalid_argument("empty training batch");
    const double scale = 1.0 / static_cast<double>(frames);

    std::vector<ClipResult> results(batch.size());
    const unsigned workers = std::min<unsigned>(worker_count(), static_cast<unsigned>(batch.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < batch.size(); ++i) results[i] = clip_loss_and_grad(net, params, batch[i], loss_options, scale);
    } else {
        std::vector<std::exception_ptr> errors(batch.size());
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < batch.size(); i += workers) {
                    try {
                        results[i] = clip_loss_and_grad(net, params, batch[i], loss_options, scale);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    double loss = 0.0;
    for (auto& r : results) {
        loss += r.loss;
        params.accumulate_grads(r.leaves);
    }
    return loss;
}

std::vector<Clip> sample_batch(const Corpus& corpus, const RunConfig& config, Rng& rng) {
    if (corpus.sequences.empty()) throw std::invalid_argument("training corpus is empty");
    const bool stateless = config.model.variant == model::Variant::Basic;
    std::vector<Clip> batch;
    for (int b = 0; b < config.batch_size; ++b) {
        const auto& seq = corpus.sequences[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(corpus.sequences.size()) - 1))];
        const int len = std::min<int>(config.sequence_length, static_cast<int>(seq.frames.size()));
        const int start = rng.uniform_int(0, static_cast<int>(seq.frames.size()) - len);
        std::vector<Image> frames(seq.frames.begin() + start, seq.frames.begin() + start + len);
        std::vector<LaneLabel> labels(seq.labels.begin() + start, seq.labels.begin() + start + len);
        AugmentedClip aug = augment(frames, labels, config.augment, rng);
        if (stateless) {
            // No state to thread: every frame is its own length-1 clip.
            for (std::size_t f = 0; f < aug.frames.size(); ++f) batch.push_back({{aug.frames[f]}, {aug.labels[f]}});
        } else {
            batch.push_back({std::move(aug.frames), std::move(aug.labels)});
        }
    }
    return batch;
}

TrainResult train(const RunConfig& config, const Corpus& corpus, std::ostream* log) {
    config.validate();
    if (corpus.manifest.height != config.model.height || corpus.manifest.width != config.model.width) {
        throw std::invalid_argument("training corpus frames are " + std::to_string(corpus.manifest.height) + "x" +
                                    std::to_string(corpus.manifest.width) + ", model expects " +
                                    std::to_string(config.model.height) + "x" + std::to_string(config.model.width));
    }
    const model::Moka net(config.model);
    TrainResult result;
    result.params = net.init_params(config.init_seed);
    num::AdamState adam = num::AdamState::for_params(result.params, config.optimizer);
    const num::LrSchedule schedule = num::LrSchedule::scaled(config.schedule_scale);
    const objective::LossOptions loss_options{config.z_offset};
    Rng rng(config.data_seed);

    for (int it = 0; it < config.iterations; ++it) {
        const auto batch = sample_batch(corpus, config, rng);
        const double lr = num::lr_at(static_cast<std::uint64_t>(it), config.optimizer.learning_rate, schedule);
        const double loss = batch_loss_and_grad(net, result.params, batch, loss_options);
        if (!std::isfinite(loss)) {
            result.aborted = true;
            result.abort_reason = "non-finite loss at iteration " + std::to_string(it);
            break;
        }
        if (!num::adam_step(result.params, adam, lr)) {
            result.aborted = true;
            result.abort_reason = "non-finite gradient at iteration " + std::to_string(it);
            break;
        }
        result.log.push_back({it, loss, lr});
        if (log && (it % config.log_every == 0 || it + 1 == config.iterations)) {
            *log << nlohmann::json{{"iteration", it}, {"loss", loss}, {"lr", lr}}.dump() << '\n';
            log->flush();
        }
    }
    if (log && result.aborted) {
        *log << nlohmann::json{{"aborted", true}, {"reason", result.abort_reason}}.dump() << '\n';
    }
    return result;
}

} // namespace laneid::harness

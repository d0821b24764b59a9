#pragma once

#include "laneid/dataset.hpp"
#include "laneid/harness/config.hpp"
#include "laneid/model.hpp"
#include "laneid/objective.hpp"
#include "laneid/rng.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace laneid::harness {

struct LogEntry {
    int iteration = 0;
    double loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    num::ParameterSet params;
    std::vector<LogEntry> log;
    bool aborted = false;
    std::string abort_reason;
};

/// One training clip: consecutive frames of one sequence.
struct Clip {
    std::vector<Image> frames;
    std::vector<LaneLabel> labels;
};

/// Mean per-frame loss over the batch, with parameter gradients accumulated
/// into `params` (which are zeroed first). Clips run in parallel; gradients
/// are reduced in clip order.
double batch_loss_and_grad(const model::Moka& net, num::ParameterSet& params, const std::vector<Clip>& batch,
                           const objective::LossOptions& loss_options);

/// Draws `batch_size` clips of `sequence_length` frames, augmented.
std::vector<Clip> sample_batch(const Corpus& corpus, const RunConfig& config, Rng& rng);

/// Adam training per the run config. Each iteration logs (iteration, loss, lr)
/// as a JSON line to `log` when given. A non-finite loss or gradient stops
/// training with aborted = true and the parameters as of the last good step.
TrainResult train(const RunConfig& config, const Corpus& corpus, std::ostream* log = nullptr);

} // namespace laneid::harness

#pragma once

#include "laneid/numerics/optim.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace laneid::model {

enum class Variant { Basic, StdLSTM, ConvLSTM };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& name);

struct ModelConfig {
    Variant variant = Variant::ConvLSTM;
    int height = 64;
    int width = 128;
    int levels = 3;
    std::vector<int> channels{16, 32, 64};
    int head_hidden = 64;
    /// Grid the final decoder map is average-pooled onto before the heads;
    /// 1x1 is a global average pool.
    int pool_rows = 4;
    int pool_cols = 8;
    int classes = 8;

    /// Throws std::invalid_argument naming the violated constraint.
    void validate() const;
    /// Spatial size of the maps at encoder level `level`.
    std::pair<int, int> level_size(int level) const;

    bool operator==(const ModelConfig&) const = default;
};

/// Hidden map and memory cell of one recurrent site.
struct CellState {
    num::Var h;
    num::Var c;
};

/// One site per encoder level (ConvLSTM) or per head (StdLSTM); empty for Basic.
struct RecurrentState {
    std::vector<CellState> cells;
    std::size_t frame = 0;
};

/// Probability vectors of the three heads.
struct ModelOutput {
    num::Tensor left;
    num::Tensor right;
    num::Tensor count;
};

/// Head outputs as graph nodes, for building a loss.
struct FrameOutput {
    num::Var left;
    num::Var right;
    num::Var count;

    ModelOutput probabilities() const { return {left.value(), right.value(), count.value()}; }
};

struct CellWeights {
    num::Var kernels; // [4C, 2C, 3, 3], gate blocks ordered input, forget, candidate, output
    num::Var bias;    // [4C]
};

/// Convolutional LSTM step without peepholes. Gates are computed by one 3x3
/// convolution over the channel concatenation [x, h], which is the sum of the
/// separate input and hidden convolutions.
CellState convlstm_cell(const num::Var& x, const num::Var& h, const num::Var& c, const CellWeights& w);

/// Fully connected LSTM step over 1-D vectors; same gate layout as convlstm_cell.
CellState lstm_cell(const num::Var& x, const num::Var& h, const num::Var& c, const num::Var& weight,
                    const num::Var& bias);

/// Encoder-decoder with long-range dense links and three classification heads.
///
/// Encoder level l applies a stride-2 3x3 convolution and ReLU; the ConvLSTM
/// variant follows it with a convLSTM cell whose hidden map feeds the next
/// level. Going back up, each decoder stage upsamples 2x (nearest) and
/// convolves the channel concatenation of every map already produced at that
/// resolution. The last decoder map is average-pooled into the head input.
/// Each head is linear -> ReLU -> linear -> softmax; the StdLSTM variant puts
/// a per-head LSTM cell in front of it.
class Moka {
public:
    explicit Moka(ModelConfig config);

    const ModelConfig& config() const noexcept { return config_; }

    /// Fan-in scaled uniform weights, deterministic in `seed`.
    num::ParameterSet init_params(std::uint64_t seed) const;
    /// Standard deviation targeted by init_params for parameter `index` (0 for zero-initialised biases).
    double init_std(std::size_t index) const;
    const std::vector<std::string>& param_names() const noexcept { return names_; }
    const std::vector<num::Shape>& param_shapes() const noexcept { return shapes_; }
    /// Throws std::invalid_argument if names or shapes differ from this architecture.
    void check_params(const num::ParameterSet& params) const;

    RecurrentState reset_state() const;
    void check_state(const RecurrentState& state) const;

    /// One frame. `params` are leaves or constants in parameter order; `image` is [3,H,W] in [0,1].
    std::pair<FrameOutput, RecurrentState> forward_frame(std::span<const num::Var> params,
                                                         const RecurrentState& state,
                                                         const num::Var& image) const;

    /// Inference convenience: no gradient tracking, state advanced in place.
    ModelOutput infer(std::span<const num::Var> constant_params, RecurrentState& state,
                      const num::Tensor& image) const;

private:
    std::size_t declare(std::string name, num::Shape shape, double gain, double bias_fill = 0.0);

    ModelConfig config_;
    std::vector<std::string> names_;
    std::vector<num::Shape> shapes_;
    std::vector<double> gains_;
    std::vector<double> bias_fill_;

    std::vector<std::size_t> enc_w_, enc_b_, cell_w_, cell_b_, dec_w_, dec_b_;
    struct HeadIndices {
        std::size_t lstm_w = 0, lstm_b = 0, fc1_w = 0, fc1_b = 0, fc2_w = 0, fc2_b = 0;
    };
    std::vector<HeadIndices> heads_;
};

/// Parameter values wrapped as constants, for inference.
std::vector<num::Var> constant_params(const num::ParameterSet& params);

} // namespace laneid::model

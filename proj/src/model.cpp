#include "laneid/model.hpp"

#include "laneid/numerics/ops.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace laneid::model {

using num::Shape;
using num::Tensor;
using num::Var;

std::string to_string(Variant v) {
    switch (v) {
    case Variant::Basic: return "basic";
    case Variant::StdLSTM: return "stdlstm";
    case Variant::ConvLSTM: return "convlstm";
    }
    return "unknown";
}

Variant variant_from_string(const std::string& name) {
    if (name == "basic") return Variant::Basic;
    if (name == "stdlstm") return Variant::StdLSTM;
    if (name == "convlstm") return Variant::ConvLSTM;
    throw std::invalid_argument("unknown model variant '" + name + "' (expected basic, stdlstm or convlstm)");
}

void ModelConfig::validate() const {
    if (levels < 2) throw std::invalid_argument("model levels must be >= 2, got " + std::to_string(levels));
    if (channels.size() != static_cast<std::size_t>(levels)) {
        throw std::invalid_argument("channels list has " + std::to_string(channels.size()) + " entries for " +
                                    std::to_string(levels) + " levels");
    }
    for (int c : channels)
        if (c < 1) throw std::invalid_argument("channel counts must be positive");
    if (head_hidden < 1) throw std::invalid_argument("head hidden size must be positive");
    if (classes < 2) throw std::invalid_argument("class count must be >= 2");
    const int factor = 1 << levels;
    if (height < factor || width < factor || height % factor != 0 || width % factor != 0) {
        throw std::invalid_argument("input " + std::to_string(height) + "x" + std::to_string(width) +
                                    " must be divisible by " + std::to_string(factor) + " for " +
                                    std::to_string(levels) + " levels");
    }
    if (pool_rows < 1 || pool_cols < 1 || (height / 2) % pool_rows != 0 || (width / 2) % pool_cols != 0) {
        throw std::invalid_argument("pool grid " + std::to_string(pool_rows) + "x" + std::to_string(pool_cols) +
                                    " must divide the " + std::to_string(height / 2) + "x" +
                                    std::to_string(width / 2) + " decoder output");
    }
}

std::pair<int, int> ModelConfig::level_size(int level) const {
    return {height >> (level + 1), width >> (level + 1)};
}

CellState convlstm_cell(const Var& x, const Var& h, const Var& c, const CellWeights& w) {
    num::require_same_shape(x.value(), h.value(), "convlstm_cell hidden");
    num::require_same_shape(x.value(), c.value(), "convlstm_cell memory");
    const std::size_t C = x.value().dim(0);
    const auto& ks = w.kernels.value().shape();
    if (ks.size() != 4 || ks[0] != 4 * C || ks[1] != 2 * C || ks[2] != 3 || ks[3] != 3) {
        throw num::ShapeError("convlstm_cell: kernels must be [" + std::to_string(4 * C) + "," +
                              std::to_string(2 * C) + ",3,3], got " + num::to_string(ks));
    }
    const Var xh[] = {x, h};
    const Var gates = num::conv2d(num::concat_channels(xh), w.kernels, w.bias, 1, 1);
    const Var i = num::sigmoid(num::slice_channels(gates, 0, C));
    const Var f = num::sigmoid(num::slice_channels(gates, C, C));
    const Var g = num::tanh(num::slice_channels(gates, 2 * C, C));
    const Var o = num::sigmoid(num::slice_channels(gates, 3 * C, C));
    const Var c_next = num::add(num::hadamard(f, c), num::hadamard(i, g));
    const Var h_next = num::hadamard(o, num::tanh(c_next));
    return {h_next, c_next};
}

CellState lstm_cell(const Var& x, const Var& h, const Var& c, const Var& weight, const Var& bias) {
    const std::size_t n = h.value().dim(0);
    num::require_same_shape(h.value(), c.value(), "lstm_cell memory");
    const Var xh[] = {x, h};
    const Var gates = num::linear(num::concat_vectors(xh), weight, bias);
    const Var i = num::sigmoid(num::slice_vector(gates, 0, n));
    const Var f = num::sigmoid(num::slice_vector(gates, n, n));
    const Var g = num::tanh(num::slice_vector(gates, 2 * n, n));
    const Var o = num::sigmoid(num::slice_vector(gates, 3 * n, n));
    const Var c_next = num::add(num::hadamard(f, c), num::hadamard(i, g));
    const Var h_next = num::hadamard(o, num::tanh(c_next));
    return {h_next, c_next};
}

namespace {

constexpr double kReluGain = 1.4142135623730951;

std::size_t as_size(int v) { return static_cast<std::size_t>(v); }

} // namespace

Moka::Moka(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
    const auto& ch = config_.channels;
    const int L = config_.levels;
    const bool conv_cells = config_.variant == Variant::ConvLSTM;

    for (int l = 0; l < L; ++l) {
        const std::size_t in = l == 0 ? 3 : as_size(ch[l - 1]);
        const std::size_t out = as_size(ch[l]);
        const std::string p = "enc" + std::to_string(l);
        enc_w_.push_back(declare(p + ".w", {out, in, 3, 3}, kReluGain));
        enc_b_.push_back(declare(p + ".b", {out}, 0.0));
        if (conv_cells) {
            const std::string q = "cell" + std::to_string(l);
            cell_w_.push_back(declare(q + ".w", {4 * out, 2 * out, 3, 3}, 1.0));
            cell_b_.push_back(declare(q + ".b", {4 * out}, 0.0, 1.0));
        }
    }
    dec_w_.assign(as_size(L - 1), 0);
    dec_b_.assign(as_size(L - 1), 0);
    for (int l = L - 2; l >= 0; --l) {
        const std::size_t skip = as_size(ch[l]) * (conv_cells ? 2 : 1);
        const std::size_t in = skip + as_size(ch[l + 1]);
        const std::size_t out = as_size(ch[l]);
        const std::string p = "dec" + std::to_string(l);
        dec_w_[as_size(l)] = declare(p + ".w", {out, in, 3, 3}, kReluGain);
        dec_b_[as_size(l)] = declare(p + ".b", {out}, 0.0);
    }

    const std::size_t feat = as_size(ch[0]) * as_size(config_.pool_rows) * as_size(config_.pool_cols);
    const std::size_t hidden = as_size(config_.head_hidden);
    const std::size_t classes = as_size(config_.classes);
    for (const char* head : {"left", "right", "count"}) {
        const std::string p = std::string("head.") + head;
        HeadIndices idx;
        std::size_t fc1_in = feat;
        if (config_.variant == Variant::StdLSTM) {
            idx.lstm_w = declare(p + ".lstm.w", {4 * hidden, feat + hidden}, 1.0);
            idx.lstm_b = declare(p + ".lstm.b", {4 * hidden}, 0.0, 1.0);
            fc1_in = hidden;
        }
        idx.fc1_w = declare(p + ".fc1.w", {hidden, fc1_in}, kReluGain);
        idx.fc1_b = declare(p + ".fc1.b", {hidden}, 0.0);
        idx.fc2_w = declare(p + ".fc2.w", {classes, hidden}, 1.0);
        idx.fc2_b = declare(p + ".fc2.b", {classes}, 0.0);
        heads_.push_back(idx);
    }
}

std::size_t Moka::declare(std::string name, Shape shape, double gain, double bias_fill) {
    names_.push_back(std::move(name));
    shapes_.push_back(std::move(shape));
    gains_.push_back(gain);
    bias_fill_.push_back(bias_fill);
    return names_.size() - 1;
}

double Moka::init_std(std::size_t index) const {
    const Shape& s = shapes_.at(index);
    if (s.size() == 1) return 0.0;
    const double fan_in = static_cast<double>(num::element_count(s) / s[0]);
    return gains_[index] / std::sqrt(fan_in);
}

num::ParameterSet Moka::init_params(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    num::ParameterSet params;
    for (std::size_t i = 0; i < names_.size(); ++i) {
        Tensor t(shapes_[i], 0.0);
        if (shapes_[i].size() == 1) {
            // Forget-gate block (second quarter) of a recurrent bias starts open.
            if (bias_fill_[i] != 0.0) {
                const std::size_t n = t.size() / 4;
                for (std::size_t j = n; j < 2 * n; ++j) t[j] = bias_fill_[i];
            }
        } else {
            const double bound = init_std(i) * std::sqrt(3.0);
            for (auto& v : t.data()) {
                const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
                v = (2.0 * u - 1.0) * bound;
            }
        }
        params.add(names_[i], std::move(t));
    }
    return params;
}

void Moka::check_params(const num::ParameterSet& params) const {
    if (params.size() != names_.size()) {
        throw std::invalid_argument("parameter count " + std::to_string(params.size()) + " does not match model (" +
                                    std::to_string(names_.size()) + ")");
    }
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (params[i].name != names_[i]) {
            throw std::invalid_argument("parameter " + std::to_string(i) + " is '" + params[i].name + "', expected '" +
                                        names_[i] + "'");
        }
        if (params[i].value.shape() != shapes_[i]) {
            throw std::invalid_argument("parameter '" + names_[i] + "' has shape " +
                                        num::to_string(params[i].value.shape()) + ", expected " +
                                        num::to_string(shapes_[i]));
        }
    }
}

RecurrentState Moka::reset_state() const {
    RecurrentState s;
    if (config_.variant == Variant::ConvLSTM) {
        for (int l = 0; l < config_.levels; ++l) {
            const auto [h, w] = config_.level_size(l);
            const Shape shape{as_size(config_.channels[as_size(l)]), as_size(h), as_size(w)};
            s.cells.push_back({Var::constant(Tensor(shape)), Var::constant(Tensor(shape))});
        }
    } else if (config_.variant == Variant::StdLSTM) {
        const Shape shape{as_size(config_.head_hidden)};
        for (int k = 0; k < 3; ++k) s.cells.push_back({Var::constant(Tensor(shape)), Var::constant(Tensor(shape))});
    }
    return s;
}

void Moka::check_state(const RecurrentState& state) const {
    const RecurrentState ref = reset_state();
    if (state.cells.size() != ref.cells.size()) {
        throw std::invalid_argument("recurrent state has " + std::to_string(state.cells.size()) +
                                    " sites, model expects " + std::to_string(ref.cells.size()));
    }
    for (std::size_t i = 0; i < ref.cells.size(); ++i) {
        if (!state.cells[i].h.valid() || !state.cells[i].c.valid() ||
            state.cells[i].h.shape() != ref.cells[i].h.shape() || state.cells[i].c.shape() != ref.cells[i].c.shape()) {
            throw std::invalid_argument("recurrent state site " + std::to_string(i) + " does not match model config");
        }
    }
}

std::pair<FrameOutput, RecurrentState> Moka::forward_frame(std::span<const Var> params, const RecurrentState& state,
                                                           const Var& image) const {
    if (params.size() != names_.size()) {
        throw std::invalid_argument("forward_frame: got " + std::to_string(params.size()) + " parameters, expected " +
                                    std::to_string(names_.size()));
    }
    const Shape expected{3, as_size(config_.height), as_size(config_.width)};
    if (image.shape() != expected) {
        throw num::ShapeError("forward_frame: image shape " + num::to_string(image.shape()) + " does not match " +
                              num::to_string(expected));
    }
    check_state(state);

    const int L = config_.levels;
    const bool conv_cells = config_.variant == Variant::ConvLSTM;
    RecurrentState next;
    next.frame = state.frame + 1;

    std::vector<std::vector<Var>> skips(as_size(L));
    Var x = image;
    for (int l = 0; l < L; ++l) {
        const auto li = as_size(l);
        Var e = num::relu(num::conv2d(x, params[enc_w_[li]], params[enc_b_[li]], 2, 1));
        skips[li].push_back(e);
        if (conv_cells) {
            CellState cs = convlstm_cell(e, state.cells[li].h, state.cells[li].c,
                                         {params[cell_w_[li]], params[cell_b_[li]]});
            skips[li].push_back(cs.h);
            x = cs.h;
            next.cells.push_back(std::move(cs));
        } else {
            x = e;
        }
    }

    Var d = x;
    for (int l = L - 2; l >= 0; --l) {
        const auto li = as_size(l);
        std::vector<Var> stack = skips[li];
        stack.push_back(num::upsample_nearest2x(d));
        d = num::relu(num::conv2d(num::concat_channels(stack), params[dec_w_[li]], params[dec_b_[li]], 1, 1));
    }
    const Var pooled = num::grid_avg_pool(d, as_size(config_.pool_rows), as_size(config_.pool_cols));

    Var heads[3];
    for (std::size_t k = 0; k < 3; ++k) {
        const HeadIndices& idx = heads_[k];
        Var in = pooled;
        if (config_.variant == Variant::StdLSTM) {
            CellState cs = lstm_cell(pooled, state.cells[k].h, state.cells[k].c, params[idx.lstm_w], params[idx.lstm_b]);
            in = cs.h;
            next.cells.push_back(std::move(cs));
        }
        const Var hidden = num::relu(num::linear(in, params[idx.fc1_w], params[idx.fc1_b]));
        heads[k] = num::softmax(num::linear(hidden, params[idx.fc2_w], params[idx.fc2_b]));
    }
    if (config_.variant == Variant::Basic) next.frame = state.frame;
    return {FrameOutput{heads[0], heads[1], heads[2]}, std::move(next)};
}

ModelOutput Moka::infer(std::span<const Var> constant_params, RecurrentState& state, const Tensor& image) const {
    auto [out, next] = forward_frame(constant_params, state, Var::constant(image));
    state = std::move(next);
    return out.probabilities();
}

std::vector<Var> constant_params(const num::ParameterSet& params) {
    std::vector<Var> out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(Var::constant(p.value));
    return out;
}

} // namespace laneid::model

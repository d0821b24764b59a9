#include "laneid/numerics/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace laneid::num {

std::size_t ParameterSet::add(std::string name, Tensor value) {
    if (find(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    Tensor grad(value.shape(), 0.0);
    params_.push_back({std::move(name), std::move(value), std::move(grad)});
    return params_.size() - 1;
}

std::optional<std::size_t> ParameterSet::find(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].name == name) return i;
    return std::nullopt;
}

std::size_t ParameterSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

void ParameterSet::zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
}

std::vector<Var> ParameterSet::bind() const {
    std::vector<Var> leaves;
    leaves.reserve(params_.size());
    for (const auto& p : params_) leaves.push_back(Var::leaf(p.value));
    return leaves;
}

void ParameterSet::accumulate_grads(const std::vector<Var>& leaves) {
    if (leaves.size() != params_.size()) throw std::invalid_argument("accumulate_grads: leaf count mismatch");
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const Tensor& g = leaves[i].node().grad;
        if (g.empty()) continue;
        auto dst = params_[i].grad.data();
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += g[j];
    }
}

bool ParameterSet::operator==(const ParameterSet& other) const {
    if (params_.size() != other.params_.size()) return false;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].name != other.params_[i].name || params_[i].value != other.params_[i].value) return false;
    }
    return true;
}

AdamState AdamState::for_params(const ParameterSet& params, AdamConfig config) {
    AdamState s;
    s.config = config;
    for (const auto& p : params) {
        s.first_moment.emplace_back(p.value.shape(), 0.0);
        s.second_moment.emplace_back(p.value.shape(), 0.0);
    }
    return s;
}

bool adam_step(ParameterSet& params, AdamState& state, double learning_rate) {
    if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
        throw std::invalid_argument("adam_step: state does not match parameter set");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        require_same_shape(params[i].value, state.first_moment[i], "adam_step moment");
        require_same_shape(params[i].value, params[i].grad, "adam_step gradient");
        if (!params[i].grad.all_finite()) {
            state.flagged = true;
            return false;
        }
    }

    const auto& c = state.config;
    const std::uint64_t t = state.step + 1;
    const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
    const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto value = params[i].value.data();
        auto grad = params[i].grad.data();
        auto m = state.first_moment[i].data();
        auto v = state.second_moment[i].data();
        for (std::size_t j = 0; j < value.size(); ++j) {
            m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * grad[j];
            v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * grad[j] * grad[j];
            const double m_hat = m[j] / correction1;
            const double v_hat = v[j] / correction2;
            const double decay = learning_rate * c.weight_decay * value[j];
            value[j] -= learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon) + decay;
        }
    }
    state.step = t;
    return true;
}

bool adam_step(ParameterSet& params, AdamState& state) {
    return adam_step(params, state, state.config.learning_rate);
}

LrSchedule LrSchedule::scaled(double factor) {
    if (!(factor > 0.0)) throw std::invalid_argument("schedule scale must be positive");
    LrSchedule s;
    s.start *= factor;
    s.period *= factor;
    return s;
}

double lr_at(std::uint64_t iteration, double base, const LrSchedule& schedule) {
    const auto it = static_cast<double>(iteration);
    if (it < schedule.start) return base;
    const double halvings = std::floor((it - schedule.start) / schedule.period) + 1.0;
    return base * std::exp2(-halvings);
}

} // namespace laneid::num

#pragma once

#include "laneid/numerics/autodiff.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace laneid::num {

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
};

/// Ordered collection of uniquely named parameters.
class ParameterSet {
public:
    /// Adds a parameter with a zero gradient; returns its index. Throws on duplicate names.
    std::size_t add(std::string name, Tensor value);

    std::size_t size() const noexcept { return params_.size(); }
    Parameter& operator[](std::size_t i) { return params_[i]; }
    const Parameter& operator[](std::size_t i) const { return params_[i]; }
    std::optional<std::size_t> find(const std::string& name) const;

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    std::size_t scalar_count() const;
    void zero_grad();

    /// Fresh gradient-tracking leaves over the current values, in parameter order.
    std::vector<Var> bind() const;
    /// Adds each leaf's gradient into the matching parameter's grad, in order.
    void accumulate_grads(const std::vector<Var>& leaves);

    bool operator==(const ParameterSet& other) const;

private:
    std::vector<Parameter> params_;
};

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 1e-4;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
    std::uint64_t step = 0;
    /// Set once a step was rejected for a non-finite gradient.
    bool flagged = false;

    /// Zero moments shaped like `params`.
    static AdamState for_params(const ParameterSet& params, AdamConfig config = {});
};

/// Applies one bias-corrected Adam update using each parameter's grad, with
/// decoupled weight decay value -= lr * decay * value. `learning_rate` overrides
/// config.learning_rate for this step (schedules pass lr_at here).
///
/// Returns false and leaves params, moments and step untouched when any gradient
/// is non-finite; state.flagged is set in that case.
bool adam_step(ParameterSet& params, AdamState& state, double learning_rate);
bool adam_step(ParameterSet& params, AdamState& state);

/// Step-decay schedule: halve the rate every `period` iterations once
/// `start` is reached, with the first halving at `start` itself.
struct LrSchedule {
    double start = 150000;
    double period = 20000;

    /// Schedule with both thresholds multiplied by `factor`.
    static LrSchedule scaled(double factor);
};

double lr_at(std::uint64_t iteration, double base, const LrSchedule& schedule = {});

} // namespace laneid::num

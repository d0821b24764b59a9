#pragma once

#include "laneid/brightness.hpp"
#include "laneid/decision.hpp"
#include "laneid/model.hpp"
#include "laneid/numerics/optim.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace laneid::harness {

struct AugmentConfig {
    double flip_probability = 0.5;
    double jitter_probability = 0.5;
    double jitter_range = 0.2;       // factor drawn from [1 - r, 1 + r]
    double noise_probability = 0.5;
    double noise_std = 4.0;          // intensity units
    double crop_probability = 0.3;
    double crop_max_fraction = 0.06; // of the width, removed from each side

    static AugmentConfig none() { return {0.0, 0.0, 0.2, 0.0, 4.0, 0.0, 0.06}; }
};

struct RunConfig {
    model::ModelConfig model;
    num::AdamConfig optimizer;
    int batch_size = 2;
    int sequence_length = 4;
    int iterations = 2000;
    double schedule_scale = 0.01;
    AugmentConfig augment;
    brightness::BrightnessConfig brightness;
    decision::Criterion criterion = decision::Criterion::MaxMinusMean;
    decision::EntropySign entropy_sign = decision::EntropySign::Negated;
    double z_offset = 0.0;
    std::uint64_t init_seed = 1;
    std::uint64_t data_seed = 2;
    std::filesystem::path train_data;
    std::filesystem::path log_path;
    int log_every = 1;

    /// Throws std::invalid_argument on a bad field; `check_paths` also requires train_data to exist.
    void validate(bool check_paths = false) const;
};

nlohmann::json to_json(const model::ModelConfig& c);
model::ModelConfig model_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RunConfig& c);
/// Missing fields keep their defaults; unknown fields are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Worker count: LANEID_THREADS if set and positive, else hardware concurrency, at least 1.
unsigned worker_count();

} // namespace laneid::harness

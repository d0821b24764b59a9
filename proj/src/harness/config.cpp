#include "laneid/harness/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <stdexcept>
#include <thread>

namespace laneid::harness {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* section) {
    std::set<std::string> allowed(known.begin(), known.end());
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw std::invalid_argument(std::string("unknown field '") + it.key() + "' in " + section + " config");
        }
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

std::string measure_name(brightness::Measure m) { return m == brightness::Measure::Luma ? "luma" : "rgb-mean"; }

brightness::Measure measure_from(const std::string& s) {
    if (s == "luma") return brightness::Measure::Luma;
    if (s == "rgb-mean") return brightness::Measure::RgbMean;
    throw std::invalid_argument("unknown brightness measure '" + s + "'");
}

} // namespace

json to_json(const model::ModelConfig& c) {
    return {{"variant", model::to_string(c.variant)}, {"height", c.height},         {"width", c.width},
            {"levels", c.levels},                    {"channels", c.channels},      {"head_hidden", c.head_hidden},
            {"classes", c.classes},                  {"pool_rows", c.pool_rows},    {"pool_cols", c.pool_cols}};
}

model::ModelConfig model_config_from_json(const json& j) {
    reject_unknown(j, {"variant", "height", "width", "levels", "channels", "head_hidden", "classes", "pool_rows", "pool_cols"},
                  "model");
    model::ModelConfig c;
    if (j.contains("variant")) c.variant = model::variant_from_string(j.at("variant").get<std::string>());
    read(j, "height", c.height);
    read(j, "width", c.width);
    read(j, "levels", c.levels);
    read(j, "channels", c.channels);
    read(j, "head_hidden", c.head_hidden);
    read(j, "classes", c.classes);
    read(j, "pool_rows", c.pool_rows);
    read(j, "pool_cols", c.pool_cols);
    c.validate();
    return c;
}

json to_json(const RunConfig& c) {
    json threshold = c.brightness.threshold ? json(*c.brightness.threshold) : json(nullptr);
    return {
        {"model", to_json(c.model)},
        {"optimizer",
         {{"learning_rate", c.optimizer.learning_rate},
          {"beta1", c.optimizer.beta1},
          {"beta2", c.optimizer.beta2},
          {"weight_decay", c.optimizer.weight_decay},
          {"epsilon", c.optimizer.epsilon}}},
        {"batch_size", c.batch_size},
        {"sequence_length", c.sequence_length},
        {"iterations", c.iterations},
        {"schedule_scale", c.schedule_scale},
        {"augment",
         {{"flip_probability", c.augment.flip_probability},
          {"jitter_probability", c.augment.jitter_probability},
          {"jitter_range", c.augment.jitter_range},
          {"noise_probability", c.augment.noise_probability},
          {"noise_std", c.augment.noise_std},
          {"crop_probability", c.augment.crop_probability},
          {"crop_max_fraction", c.augment.crop_max_fraction}}},
        {"brightness",
         {{"enabled", c.brightness.enabled},
          {"threshold", threshold},
          {"measure", measure_name(c.brightness.measure)},
          {"window", c.brightness.window},
          {"max_gain", c.brightness.max_gain}}},
        {"criterion", decision::to_string(c.criterion)},
        {"entropy_sign", c.entropy_sign == decision::EntropySign::Negated ? "negated" : "raw"},
        {"z_offset", c.z_offset},
        {"init_seed", c.init_seed},
        {"data_seed", c.data_seed},
        {"train_data", c.train_data.string()},
        {"log_path", c.log_path.string()},
        {"log_every", c.log_every},
    };
}

RunConfig run_config_from_json(const json& j) {
    reject_unknown(j,
                   {"model", "optimizer", "batch_size", "sequence_length", "iterations", "schedule_scale", "augment",
                    "brightness", "criterion", "entropy_sign", "z_offset", "init_seed", "data_seed", "train_data",
                    "log_path", "log_every"},
                   "run");
    RunConfig c;
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
    if (j.contains("optimizer")) {
        const auto& o = j.at("optimizer");
        reject_unknown(o, {"learning_rate", "beta1", "beta2", "weight_decay", "epsilon"}, "optimizer");
        read(o, "learning_rate", c.optimizer.learning_rate);
        read(o, "beta1", c.optimizer.beta1);
        read(o, "beta2", c.optimizer.beta2);
        read(o, "weight_decay", c.optimizer.weight_decay);
        read(o, "epsilon", c.optimizer.epsilon);
    }
    read(j, "batch_size", c.batch_size);
    read(j, "sequence_length", c.sequence_length);
    read(j, "iterations", c.iterations);
    read(j, "schedule_scale", c.schedule_scale);
    if (j.contains("augment")) {
        const auto& a = j.at("augment");
        reject_unknown(a,
                       {"flip_probability", "jitter_probability", "jitter_range", "noise_probability", "noise_std",
                        "crop_probability", "crop_max_fraction"},
                       "augment");
        read(a, "flip_probability", c.augment.flip_probability);
        read(a, "jitter_probability", c.augment.jitter_probability);
        read(a, "jitter_range", c.augment.jitter_range);
        read(a, "noise_probability", c.augment.noise_probability);
        read(a, "noise_std", c.augment.noise_std);
        read(a, "crop_probability", c.augment.crop_probability);
        read(a, "crop_max_fraction", c.augment.crop_max_fraction);
    }
    if (j.contains("brightness")) {
        const auto& b = j.at("brightness");
        reject_unknown(b, {"enabled", "threshold", "measure", "window", "max_gain"}, "brightness");
        read(b, "enabled", c.brightness.enabled);
        if (b.contains("threshold")) {
            if (b.at("threshold").is_null()) c.brightness.threshold.reset();
            else c.brightness.threshold = b.at("threshold").get<double>();
        }
        if (b.contains("measure")) c.brightness.measure = measure_from(b.at("measure").get<std::string>());
        read(b, "window", c.brightness.window);
        read(b, "max_gain", c.brightness.max_gain);
    }
    if (j.contains("criterion")) c.criterion = decision::criterion_from_string(j.at("criterion").get<std::string>());
    if (j.contains("entropy_sign")) {
        const auto s = j.at("entropy_sign").get<std::string>();
        if (s == "negated") c.entropy_sign = decision::EntropySign::Negated;
        else if (s == "raw") c.entropy_sign = decision::EntropySign::Raw;
        else throw std::invalid_argument("entropy_sign must be 'negated' or 'raw'");
    }
    read(j, "z_offset", c.z_offset);
    read(j, "init_seed", c.init_seed);
    read(j, "data_seed", c.data_seed);
    if (j.contains("train_data")) c.train_data = j.at("train_data").get<std::string>();
    if (j.contains("log_path")) c.log_path = j.at("log_path").get<std::string>();
    read(j, "log_every", c.log_every);
    c.validate();
    return c;
}

void RunConfig::validate(bool check_paths) const {
    model.validate();
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (sequence_length < 1) throw std::invalid_argument("sequence_length must be >= 1");
    if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
    if (!(schedule_scale > 0.0)) throw std::invalid_argument("schedule_scale must be positive");
    if (!(optimizer.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (log_every < 1) throw std::invalid_argument("log_every must be >= 1");
    if (check_paths && !std::filesystem::exists(train_data / "manifest.json")) {
        throw std::invalid_argument("train_data '" + train_data.string() + "' has no manifest.json");
    }
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
    RunConfig c = run_config_from_json(j);
    // Relative data paths resolve against the config file's directory.
    const auto base = path.parent_path();
    if (!c.train_data.empty() && c.train_data.is_relative()) c.train_data = base / c.train_data;
    if (!c.log_path.empty() && c.log_path.is_relative()) c.log_path = base / c.log_path;
    return c;
}

unsigned worker_count() {
    if (const char* env = std::getenv("LANEID_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace laneid::harness

#include "laneid/harness/sweep.hpp"

#include <iomanip>
#include <ostream>

namespace laneid::harness {

std::vector<BrightnessSweepRow> sweep_brightness(const std::string& variant, const PredictorFactory& factory,
                                                 const Corpus& corpus, const std::vector<double>& thresholds,
                                                 decision::Criterion criterion) {
    std::vector<BrightnessSweepRow> rows;
    EvalOptions options;
    options.criterion = criterion;
    options.brightness = brightness::BrightnessConfig::disabled();
    rows.push_back({variant, std::nullopt, evaluate(corpus, factory, options)});
    for (double b : thresholds) {
        options.brightness = brightness::BrightnessConfig::with_threshold(b);
        rows.push_back({variant, b, evaluate(corpus, factory, options)});
    }
    return rows;
}

std::vector<BrightnessSweepRow> sweep_brightness(const Checkpoint& ckpt, const Corpus& corpus,
                                                 const std::vector<double>& thresholds,
                                                 decision::Criterion criterion) {
    return sweep_brightness(model::to_string(ckpt.config.variant), model_predictor(ckpt, corpus), corpus, thresholds,
                            criterion);
}

void write_brightness_csv(std::ostream& out, const std::vector<BrightnessSweepRow>& rows) {
    out << "variant,threshold,raw,final\n" << std::setprecision(6) << std::fixed;
    for (const auto& r : rows) {
        out << r.variant << ',';
        if (r.threshold) out << std::setprecision(0) << *r.threshold << std::setprecision(6);
        else out << "off";
        out << ',' << r.metrics.raw_combined() << ',' << r.metrics.final_accuracy() << '\n';
    }
}

DecisionSweep sweep_decision(const std::string& variant, const PredictorFactory& factory, const Corpus& corpus,
                             const brightness::BrightnessConfig& brightness) {
    DecisionSweep s;
    s.variant = variant;
    s.criteria.assign(decision::kAllCriteria.begin(), decision::kAllCriteria.end());
    s.metrics = evaluate_criteria(corpus, factory, brightness, s.criteria);
    return s;
}

DecisionSweep sweep_decision(const Checkpoint& ckpt, const Corpus& corpus,
                             const brightness::BrightnessConfig& brightness) {
    return sweep_decision(model::to_string(ckpt.config.variant), model_predictor(ckpt, corpus), corpus, brightness);
}

void write_decision_csv(std::ostream& out, const std::vector<DecisionSweep>& sweeps) {
    out << "variant,raw";
    for (auto c : decision::kAllCriteria) out << ',' << decision::to_string(c);
    out << '\n' << std::setprecision(6) << std::fixed;
    for (const auto& s : sweeps) {
        out << s.variant << ',' << s.raw();
        for (const auto& m : s.metrics) out << ',' << m.final_accuracy();
        out << '\n';
    }
}

nlohmann::json to_json(const std::vector<BrightnessSweepRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : rows) {
        out.push_back({{"variant", r.variant},
                       {"threshold", r.threshold ? nlohmann::json(*r.threshold) : nlohmann::json("off")},
                       {"metrics", r.metrics.to_json()}});
    }
    return out;
}

nlohmann::json to_json(const DecisionSweep& sweep) {
    nlohmann::json finals;
    for (std::size_t i = 0; i < sweep.criteria.size(); ++i) {
        finals[decision::to_string(sweep.criteria[i])] = sweep.metrics[i].final_accuracy();
    }
    return {{"variant", sweep.variant}, {"raw", sweep.raw()}, {"final", finals}};
}

} // namespace laneid::harness

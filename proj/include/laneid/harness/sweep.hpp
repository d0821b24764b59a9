#pragma once

#include "laneid/harness/evaluate.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace laneid::harness {

inline const std::vector<double> kDefaultThresholds{100, 130, 150, 170};

struct BrightnessSweepRow {
    std::string variant;
    std::optional<double> threshold; // nullopt: adjustment disabled
    Metrics metrics;
};

/// One evaluation with adjustment disabled, then one per threshold.
std::vector<BrightnessSweepRow> sweep_brightness(const Checkpoint& ckpt, const Corpus& corpus,
                                                 const std::vector<double>& thresholds,
                                                 decision::Criterion criterion = decision::Criterion::MaxMinusMean);
std::vector<BrightnessSweepRow> sweep_brightness(const std::string& variant, const PredictorFactory& factory,
                                                 const Corpus& corpus, const std::vector<double>& thresholds,
                                                 decision::Criterion criterion = decision::Criterion::MaxMinusMean);

/// Columns: variant,threshold,raw,final ("off" for the disabled row).
void write_brightness_csv(std::ostream& out, const std::vector<BrightnessSweepRow>& rows);

struct DecisionSweep {
    std::string variant;
    std::vector<decision::Criterion> criteria;
    std::vector<Metrics> metrics; // parallel to criteria

    double raw() const { return metrics.front().raw_combined(); }
};

/// Final accuracy under all five criteria from one pass over the corpus.
DecisionSweep sweep_decision(const std::string& variant, const PredictorFactory& factory, const Corpus& corpus,
                             const brightness::BrightnessConfig& brightness = brightness::BrightnessConfig::disabled());
DecisionSweep sweep_decision(const Checkpoint& ckpt, const Corpus& corpus,
                             const brightness::BrightnessConfig& brightness = brightness::BrightnessConfig::disabled());

/// Columns: variant,raw,max,max-m,e,max-e,z-score.
void write_decision_csv(std::ostream& out, const std::vector<DecisionSweep>& sweeps);

nlohmann::json to_json(const std::vector<BrightnessSweepRow>& rows);
nlohmann::json to_json(const DecisionSweep& sweep);

} // namespace laneid::harness

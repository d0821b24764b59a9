// laneid: corpus generation, training, evaluation and sweeps for lane-ID estimation.

#include "laneid/dataset.hpp"
#include "laneid/harness/checkpoint.hpp"
#include "laneid/harness/config.hpp"
#include "laneid/harness/evaluate.hpp"
#include "laneid/harness/sweep.hpp"
#include "laneid/harness/train.hpp"
#include "laneid/synthgen.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace laneid;

brightness::BrightnessConfig parse_brightness(const std::string& value) {
    if (value == "off") return brightness::BrightnessConfig::disabled();
    try {
        std::size_t used = 0;
        const double b = std::stod(value, &used);
        if (used == value.size()) return brightness::BrightnessConfig::with_threshold(b);
    } catch (const std::exception&) {
    }
    throw CLI::ValidationError("--brightness", "expected a threshold or 'off', got '" + value + "'");
}

std::vector<double> parse_thresholds(const std::string& list) {
    std::vector<double> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stod(item));
    }
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lane-ID estimation toolkit"};
    app.require_subcommand(1);

    std::string profile = "train", out_dir;
    int count = 200;
    std::uint64_t seed = 1;
    synth::CorpusOptions corpus_opts;
    auto* gen = app.add_subcommand("gen", "Generate a synthetic road-sequence corpus");
    gen->add_option("--profile", profile, "train | test | tunnel-test")->check(CLI::IsMember({"train", "test", "tunnel-test"}));
    gen->add_option("--count", count, "Number of sequences")->required();
    gen->add_option("--seed", seed, "Corpus seed")->required();
    gen->add_option("--out", out_dir, "Output directory")->required();
    gen->add_option("--frames", corpus_opts.frames, "Frames per sequence");
    gen->add_option("--height", corpus_opts.height, "Image height");
    gen->add_option("--width", corpus_opts.width, "Image width");

    std::string config_path, ckpt_out, log_out;
    auto* train = app.add_subcommand("train", "Train a model from a JSON run config");
    train->add_option("--config", config_path, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    train->add_option("--out", ckpt_out, "Checkpoint to write")->required();
    train->add_option("--log", log_out, "Training log (JSON lines); overrides log_path");

    std::string ckpt_path, data_dir, brightness_arg = "off", criterion_arg = "max-m", report_out;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a corpus");
    eval->add_option("--ckpt", ckpt_path)->required()->check(CLI::ExistingFile);
    eval->add_option("--data", data_dir)->required()->check(CLI::ExistingDirectory);
    eval->add_option("--brightness", brightness_arg, "Threshold B or 'off'");
    eval->add_option("--criterion", criterion_arg, "max | max-m | e | max-e | z-score");
    eval->add_option("--out", report_out, "JSON summary path (default stdout)");

    std::string thresholds_arg = "100,130,150,170";
    auto* sweep_b = app.add_subcommand("sweep-brightness", "Evaluate across brightness thresholds (CSV)");
    sweep_b->add_option("--ckpt", ckpt_path)->required()->check(CLI::ExistingFile);
    sweep_b->add_option("--data", data_dir)->required()->check(CLI::ExistingDirectory);
    sweep_b->add_option("--thresholds", thresholds_arg, "Comma-separated thresholds");
    sweep_b->add_option("--criterion", criterion_arg);
    sweep_b->add_option("--out", report_out, "CSV path (default stdout)");

    auto* sweep_d = app.add_subcommand("sweep-decision", "Evaluate all five decision criteria (CSV)");
    sweep_d->add_option("--ckpt", ckpt_path)->required()->check(CLI::ExistingFile);
    sweep_d->add_option("--data", data_dir)->required()->check(CLI::ExistingDirectory);
    sweep_d->add_option("--brightness", brightness_arg, "Threshold B or 'off'");
    sweep_d->add_option("--out", report_out, "CSV path (default stdout)");

    auto* infer = app.add_subcommand("infer", "Per-frame decisions as JSON lines");
    infer->add_option("--ckpt", ckpt_path)->required()->check(CLI::ExistingFile);
    infer->add_option("--data", data_dir)->required()->check(CLI::ExistingDirectory);
    infer->add_option("--out", report_out, "results.jsonl path")->required();
    infer->add_option("--brightness", brightness_arg, "Threshold B or 'off'");
    infer->add_option("--criterion", criterion_arg);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            synth::make_corpus(synth::profile_from_string(profile), count, seed, out_dir, corpus_opts);
            std::cerr << "wrote " << count << " " << profile << " sequences to " << out_dir << '\n';
        } else if (*train) {
            harness::RunConfig cfg = harness::load_run_config(config_path);
            cfg.validate(true);
            if (!log_out.empty()) cfg.log_path = log_out;
            const Corpus corpus = load_corpus(cfg.train_data);
            std::ofstream log_file;
            if (!cfg.log_path.empty()) {
                log_file.open(cfg.log_path);
                if (!log_file) throw std::runtime_error("cannot write log " + cfg.log_path.string());
            }
            auto result = harness::train(cfg, corpus, log_file.is_open() ? &log_file : nullptr);
            nlohmann::json meta{{"run_config", harness::to_json(cfg)},
                                {"iterations_completed", result.log.size()},
                                {"aborted", result.aborted}};
            harness::save_checkpoint(ckpt_out, result.params, cfg.model, meta);
            if (result.aborted) {
                std::cerr << "training aborted: " << result.abort_reason << " (checkpoint saved to " << ckpt_out << ")\n";
                return 2;
            }
            std::cerr << "trained " << result.log.size() << " iterations, final loss "
                      << (result.log.empty() ? 0.0 : result.log.back().loss) << '\n';
        } else if (*eval) {
            const auto ckpt = harness::load_checkpoint(ckpt_path);
            const Corpus corpus = load_corpus(data_dir);
            harness::EvalOptions opts{parse_brightness(brightness_arg), decision::criterion_from_string(criterion_arg)};
            const auto m = harness::evaluate(ckpt, corpus, opts);
            write_text(report_out, m.to_json().dump(2) + "\n");
        } else if (*sweep_b) {
            const auto ckpt = harness::load_checkpoint(ckpt_path);
            const Corpus corpus = load_corpus(data_dir);
            const auto rows = harness::sweep_brightness(ckpt, corpus, parse_thresholds(thresholds_arg),
                                                        decision::criterion_from_string(criterion_arg));
            std::ostringstream csv;
            harness::write_brightness_csv(csv, rows);
            write_text(report_out, csv.str());
        } else if (*sweep_d) {
            const auto ckpt = harness::load_checkpoint(ckpt_path);
            const Corpus corpus = load_corpus(data_dir);
            const auto sweep = harness::sweep_decision(ckpt, corpus, parse_brightness(brightness_arg));
            std::ostringstream csv;
            harness::write_decision_csv(csv, {sweep});
            write_text(report_out, csv.str());
        } else if (*infer) {
            const auto ckpt = harness::load_checkpoint(ckpt_path);
            const Corpus corpus = load_corpus(data_dir);
            harness::EvalOptions opts{parse_brightness(brightness_arg), decision::criterion_from_string(criterion_arg)};
            std::vector<harness::FrameRecord> records;
            harness::evaluate(ckpt, corpus, opts, &records);
            std::ofstream out(report_out);
            if (!out) throw std::runtime_error("cannot write " + report_out);
            for (const auto& r : records) out << harness::to_json(r).dump() << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

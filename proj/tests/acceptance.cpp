// Acceptance run: one PASS/FAIL line per headline criterion.
//
// Generates its own corpora under --work, trains the desk-scale convLSTM and
// Basic models, and evaluates them. Takes roughly half an hour on one core.

#include "laneid/brightness.hpp"
#include "laneid/conventions.hpp"
#include "laneid/dataset.hpp"
#include "laneid/decision.hpp"
#include "laneid/harness/checkpoint.hpp"
#include "laneid/harness/evaluate.hpp"
#include "laneid/harness/sweep.hpp"
#include "laneid/harness/train.hpp"
#include "laneid/model.hpp"
#include "laneid/numerics/gradcheck.hpp"
#include "laneid/numerics/ops.hpp"
#include "laneid/numerics/optim.hpp"
#include "laneid/objective.hpp"
#include "laneid/synthgen.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>

using namespace laneid;
using namespace laneid::harness;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kGradTolerance = 1e-4;
constexpr double kGradEps = 1e-5;
constexpr double kGradSeconds = 60.0;
constexpr double kFormulaTolerance = 1e-9;
constexpr int kLabelCount = 10000;
constexpr double kRawTarget = 0.90;
constexpr double kTrainMinutes = 30.0;
constexpr int kTrainSequences = 200;
constexpr int kTestSequences = 50;
constexpr int kTunnelSequences = 50;
constexpr std::uint64_t kTrainSeed = 11;
constexpr std::uint64_t kTestSeed = 12;
constexpr std::uint64_t kTunnelSeed = 13;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
    std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    failures += !pass;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Every Metrics produced during the run, for the invariant check.
std::vector<std::pair<std::string, Metrics>> all_metrics;

void record(const std::string& what, const Metrics& m) { all_metrics.emplace_back(what, m); }

void gradient_fidelity() {
    model::ModelConfig c;
    c.height = 16;
    c.width = 32;
    c.levels = 2;
    c.channels = {4, 8};
    c.head_hidden = 8;
    const model::Moka net(c);
    const auto params = net.init_params(3);
    std::vector<num::Tensor> values;
    for (const auto& p : params) values.push_back(p.value);

    Rng rng(22);
    num::Tensor frames[2];
    for (auto& f : frames) {
        f = num::Tensor({3, 16, 32});
        for (auto& v : f.data()) v = rng.uniform(0.0, 1.0);
    }
    const LaneLabel labels[2] = {LaneLabel::from_left(2, 4), LaneLabel::from_left(3, 4)};
    auto loss = [&](std::span<const num::Var> p) {
        model::RecurrentState s = net.reset_state();
        num::Var total;
        for (int f = 0; f < 2; ++f) {
            auto [out, next] = net.forward_frame(p, s, num::Var::constant(frames[f]));
            const num::Var l = objective::total_loss(out, labels[f]).total;
            total = total.valid() ? num::add(total, l) : l;
            s = std::move(next);
        }
        return total;
    };

    const auto t0 = Clock::now();
    const auto a = num::analytic_gradients(loss, values);
    bool finite = true;
    const auto n = num::numeric_gradients(loss, values, kGradEps, &finite);
    const double secs = seconds_since(t0);
    const auto r = num::compare_gradients(a, n);

    double worst_abs = 0.0, mixed = 0.0;
    std::size_t below = 0, count = 0;
    for (std::size_t t = 0; t < a.size(); ++t)
        for (std::size_t i = 0; i < a[t].size(); ++i) {
            const double d = std::fabs(a[t][i] - n[t][i]), m = std::max(std::fabs(a[t][i]), std::fabs(n[t][i]));
            worst_abs = std::max(worst_abs, d);
            mixed = std::max(mixed, d / (kGradTolerance * m + 1e-8));
            below += m > 0.0 && m < 5e-6;
            ++count;
        }
    report(finite && r.max_relative_error < kGradTolerance && secs < kGradSeconds, "gradient-fidelity",
           fmt("max relative error %.3g (need < %g) at %s[%zu], %.1f s; max |a-n| %.2g over %zu coords, "
               "%zu coords with |g| < 5e-6; mixed-tolerance ratio %.3g",
               r.max_relative_error, kGradTolerance, params[r.worst_tensor].name.c_str(), r.worst_index, secs,
               worst_abs, count, below, mixed));
}

void formula_suite() {
    std::vector<std::pair<std::string, double>> errs; // name, |got - want|
    auto expect = [&](const std::string& name, double got, double want) { errs.emplace_back(name, std::fabs(got - want)); };

    const num::Tensor uniform({8}, 0.125);
    expect("cross-entropy uniform = ln 8", objective::cross_entropy(uniform, objective::one_hot(3, 8)), 2.0794415416798357);
    expect("adaptive weight at 0", objective::adaptive_weight(0.0), 2.0);
    expect("adaptive weight at 1", objective::adaptive_weight(1.0), 1.0 + std::exp(-5.0));
    expect("temporal penalty P(7,1)", decision::temporal_penalty(7, 1), 1.0 / 7.0);
    expect("temporal penalty without history", decision::temporal_penalty(4, std::nullopt), 1.0);
    expect("right_from_left(2,4)", right_from_left(2, 4), 3);
    double worst_residual = 0.0;
    for (int c = 1; c <= kMaxLanes; ++c)
        for (int d = 1; d <= c; ++d) {
            const auto l = LaneLabel::from_left(d, c);
            worst_residual = std::max(worst_residual, std::fabs(triangular_residual(l.delta_l, l.delta_r, l.lane_count)));
        }
    expect("triangular residual zero on all valid labels", worst_residual, 0.0);
    {
        const auto s = num::softmax(num::Var::constant(num::Tensor::vector({std::log(2.0), 0.0}))).value();
        expect("softmax [ln2, 0]", s[0], 2.0 / 3.0);
    }
    {
        const auto loss = objective::total_loss(model::ModelOutput{uniform, uniform, uniform}, LaneLabel{1, 1, 1});
        expect("total loss, uniform heads, label (1,1,1)", loss.total,
               (2.0 * (1.0 + std::exp(-5.0)) + 1.0) * 2.0794415416798357 + 3.5);
    }
    expect("max-minus-mean of one-hot", decision::criterion_score(objective::one_hot(4, 8), decision::Criterion::MaxMinusMean), 0.875);
    expect("z-score of one-hot", decision::criterion_score(objective::one_hot(4, 8), decision::Criterion::ZScore), std::sqrt(7.0));
    expect("lr at 100000 (unscaled)", num::lr_at(100000, 1e-4), 1e-4);

    // Brightness gain: a frame darker than the mean 200 is scaled by 200 / b; channels clamp at 255.
    {
        brightness::BrightnessTracker tr;
        tr.update(200.0);
        Image img(2, 1, {90, 90, 90});
        img.set(1, 0, {200, 200, 200});
        const auto adj = brightness::adjust(img, tr);
        expect("alpha = mean / b", adj.factor, 200.0 / brightness::perceived_brightness(img));
        expect("channel clamped at 255", adj.image.channel(1, 0, 0), 255.0);
    }
    // Gain cap: a near-black frame under a bright history is lifted by at most max_gain.
    {
        brightness::BrightnessTracker tr;
        tr.update(250.0);
        const auto adj = brightness::adjust(Image(2, 2, {5, 5, 5}), tr);
        expect("alpha capped at 8", adj.factor, 8.0);
        expect("capped pixel value", adj.image.channel(0, 0, 0), 40.0);
    }

    double worst = 0.0;
    std::string worst_name;
    for (const auto& [name, e] : errs)
        if (!(e <= worst)) {
            worst = e;
            worst_name = name;
        }
    report(worst <= kFormulaTolerance, "formula-suite",
           fmt("%zu checks, worst error %.3g (%s), tolerance %g", errs.size(), worst, worst_name.c_str(), kFormulaTolerance));
}

void label_consistency() {
    int checked = 0, bad = 0;
    const synth::CorpusOptions small{16, 16, 32};
    const synth::Profile profiles[] = {synth::Profile::Train, synth::Profile::Test, synth::Profile::TunnelTest};
    for (int i = 0; checked < kLabelCount; ++i) {
        const auto rec = synth::generate_sequence(synth::draw_scene(profiles[i % 3], 77, i, small));
        for (const auto& l : rec.labels) {
            if (checked == kLabelCount) break;
            ++checked;
            bad += !(l.valid() && right_from_left(l.delta_l, l.lane_count) == l.delta_r);
        }
    }
    report(bad == 0, "label-consistency", fmt("%d of %d generated labels satisfy the identity", checked - bad, checked));
}

struct Trained {
    Checkpoint ckpt;
    double minutes = 0.0;
    bool aborted = false;
};

Trained train_variant(model::Variant v, const Corpus& corpus, const fs::path& out) {
    RunConfig run;
    run.model.variant = v;
    std::ofstream log(out.string() + ".log.jsonl");
    run.log_every = 100;
    const auto t0 = Clock::now();
    auto result = train(run, corpus, &log);
    Trained t;
    t.minutes = seconds_since(t0) / 60.0;
    t.aborted = result.aborted;
    save_checkpoint(out, result.params, run.model, {{"iterations", run.iterations}});
    t.ckpt = load_checkpoint(out);
    std::printf("  trained %s in %.1f min, last logged loss %.4f\n", model::to_string(v).c_str(), t.minutes,
                result.log.empty() ? NAN : result.log.back().loss);
    std::fflush(stdout);
    return t;
}

void desk_training(const Trained& conv, const Corpus& test) {
    const auto m = evaluate(conv.ckpt, test, EvalOptions{});
    record("convlstm/test", m);
    report(!conv.aborted && m.raw_combined() >= kRawTarget && conv.minutes <= kTrainMinutes, "desk-training",
           fmt("raw %.4f (need >= %.2f), final %.4f, left %.4f, right %.4f, count %.4f; training %.1f min (limit %.0f)",
               m.raw_combined(), kRawTarget, m.final_accuracy(), m.left_only(), m.right_only(), m.count_accuracy(),
               conv.minutes, kTrainMinutes));
}

// Best threshold row by (raw, final); row 0 is the disabled row.
const BrightnessSweepRow& best_row(const std::vector<BrightnessSweepRow>& rows) {
    const BrightnessSweepRow* best = &rows[1];
    for (std::size_t i = 2; i < rows.size(); ++i) {
        const auto& m = rows[i].metrics;
        if (m.raw_correct > best->metrics.raw_correct ||
            (m.raw_correct == best->metrics.raw_correct && m.final_correct > best->metrics.final_correct))
            best = &rows[i];
    }
    return *best;
}

void tunnel_trend(const Trained& conv, const Trained& basic, const Corpus& tunnel) {
    const auto rc = sweep_brightness(conv.ckpt, tunnel, kDefaultThresholds);
    const auto rb = sweep_brightness(basic.ckpt, tunnel, kDefaultThresholds);
    for (const auto& r : rc) record("convlstm/tunnel", r.metrics);
    for (const auto& r : rb) record("basic/tunnel", r.metrics);
    std::ostringstream csv;
    write_brightness_csv(csv, rc);
    write_brightness_csv(csv, rb);
    std::printf("%s", csv.str().c_str());

    const auto& c_off = rc[0].metrics;
    const auto& c_on = best_row(rc).metrics;
    const auto& b_off = rb[0].metrics;
    const auto& b_on = best_row(rb).metrics;
    const double gain_c = c_on.raw_combined() - c_off.raw_combined();
    const double gain_b = b_on.raw_combined() - b_off.raw_combined();
    const bool no_worse = c_on.raw_correct >= c_off.raw_correct && c_on.final_correct >= c_off.final_correct;
    report(no_worse && gain_c - gain_b > 0.0, "tunnel-trend",
           fmt("convLSTM B=%.0f raw %.4f/%.4f final %.4f/%.4f (on/off); basic B=%.0f raw gain %.4f; "
               "difference of raw gains %.4f (need > 0)",
               *best_row(rc).threshold, c_on.raw_combined(), c_off.raw_combined(), c_on.final_accuracy(),
               c_off.final_accuracy(), *best_row(rb).threshold, gain_b, gain_c - gain_b));
}

// Scores the true label of every frame, found by matching the sequence's first frame.
class OraclePredictor final : public FramePredictor {
public:
    explicit OraclePredictor(const Corpus& c) : corpus_(c) {}
    void reset() override { seq_ = nullptr; }
    model::ModelOutput predict(const Image& frame) override {
        if (!seq_) {
            for (const auto& s : corpus_.sequences)
                if (s.frames.front() == frame) seq_ = &s;
            if (!seq_) throw std::logic_error("oracle: unknown sequence");
            i_ = 0;
        }
        const auto& l = seq_->labels.at(i_++);
        return {objective::one_hot(l.delta_l, 8), objective::one_hot(l.delta_r, 8), objective::one_hot(l.lane_count, 8)};
    }
private:
    const Corpus& corpus_;
    const Sequence* seq_ = nullptr;
    std::size_t i_ = 0;
};

void decision_sweep(const Trained& conv, const Corpus& test) {
    const auto s = sweep_decision(conv.ckpt, test);
    const auto oracle = sweep_decision("oracle", [&] { return std::make_unique<OraclePredictor>(test); }, test);
    std::ostringstream csv;
    write_decision_csv(csv, {s, oracle});
    std::printf("%s", csv.str().c_str());
    for (const auto& m : s.metrics) record("convlstm/decision", m);
    for (const auto& m : oracle.metrics) record("oracle/decision", m);

    bool raw_invariant = true, oracle_perfect = true;
    for (const auto& m : s.metrics) raw_invariant &= m.raw_correct == s.metrics.front().raw_correct;
    for (const auto& m : oracle.metrics) oracle_perfect &= m.final_correct == m.frames && m.raw_correct == m.frames;
    const bool five = s.criteria.size() == 5 && s.metrics.size() == 5;
    std::string finals;
    for (std::size_t i = 0; i < s.criteria.size(); ++i)
        finals += fmt("%s %.4f ", decision::to_string(s.criteria[i]).c_str(), s.metrics[i].final_accuracy());
    report(five && raw_invariant && oracle_perfect, "decision-sweep",
           fmt("%zu criteria, raw %.4f under all: %s; oracle 1.0 under all: %s; finals: %s", s.criteria.size(), s.raw(),
               raw_invariant ? "yes" : "no", oracle_perfect ? "yes" : "no", finals.c_str()));
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void determinism(const Trained& conv, const Corpus& train_corpus, const Corpus& test, const fs::path& work) {
    RunConfig run;
    run.iterations = 25;
    fs::path paths[2] = {work / "det_a.bin", work / "det_b.bin"};
    std::vector<double> losses[2];
    for (int k = 0; k < 2; ++k) {
        ::setenv("LANEID_THREADS", k == 0 ? "1" : "2", 1);
        const auto r = train(run, train_corpus);
        save_checkpoint(paths[k], r.params, run.model);
        for (const auto& e : r.log) losses[k].push_back(e.loss);
    }
    const bool ckpt_same = file_bytes(paths[0]) == file_bytes(paths[1]) && losses[0] == losses[1];

    ::setenv("LANEID_THREADS", "1", 1);
    const auto m1 = evaluate(conv.ckpt, test, EvalOptions{});
    ::setenv("LANEID_THREADS", "3", 1);
    const auto m2 = evaluate(conv.ckpt, test, EvalOptions{});
    ::unsetenv("LANEID_THREADS");
    record("convlstm/test rerun", m1);
    record("convlstm/test rerun", m2);
    report(ckpt_same && m1 == m2, "determinism",
           fmt("25-iteration retrain checkpoints byte-identical: %s; evaluation counts identical across reruns: %s",
               ckpt_same ? "yes" : "no", m1 == m2 ? "yes" : "no"));
}

void metric_invariants() {
    std::size_t bad = 0;
    std::string first_bad;
    for (const auto& [what, m] : all_metrics)
        if (!m.invariants_hold()) {
            if (!bad) first_bad = what;
            ++bad;
        }
    report(bad == 0 && !all_metrics.empty(), "metric-invariants",
           fmt("%zu evaluation results checked, %zu violations%s%s", all_metrics.size(), bad, bad ? ", first: " : "",
               first_bad.c_str()));
}

Corpus make(synth::Profile p, int count, std::uint64_t seed, const fs::path& dir) {
    if (!fs::exists(dir / "manifest.json")) synth::make_corpus(p, count, seed, dir);
    return load_corpus(dir);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"laneid acceptance run"};
    std::string work = "acceptance_work";
    app.add_option("--work", work, "Directory for corpora and checkpoints (reused when present)");
    CLI11_PARSE(app, argc, argv);
    const fs::path dir(work);
    fs::create_directories(dir);

    gradient_fidelity();
    formula_suite();
    label_consistency();

    const Corpus train_corpus = make(synth::Profile::Train, kTrainSequences, kTrainSeed, dir / "train");
    const Corpus test = make(synth::Profile::Test, kTestSequences, kTestSeed, dir / "test");
    const Corpus tunnel = make(synth::Profile::TunnelTest, kTunnelSequences, kTunnelSeed, dir / "tunnel");

    const auto conv = train_variant(model::Variant::ConvLSTM, train_corpus, dir / "convlstm.bin");
    desk_training(conv, test);
    const auto basic = train_variant(model::Variant::Basic, train_corpus, dir / "basic.bin");
    tunnel_trend(conv, basic, tunnel);
    decision_sweep(conv, test);
    determinism(conv, train_corpus, test, dir);
    metric_invariants();

    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}

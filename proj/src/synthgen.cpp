#include "laneid/synthgen.hpp"

#include "laneid/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace laneid::synth {

namespace {

std::uint8_t shade(std::uint8_t base, double ambient) {
    return static_cast<std::uint8_t>(std::lround(base * ambient / 255.0));
}

std::array<std::uint8_t, 3> shade(const std::array<std::uint8_t, 3>& rgb, double ambient) {
    return {shade(rgb[0], ambient), shade(rgb[1], ambient), shade(rgb[2], ambient)};
}

struct Occluder {
    int lane;
    double depth;
    double speed;
    std::uint8_t gray;
};

std::vector<Occluder> draw_occluders(const SceneSpec& spec) {
    Rng rng(derive_seed(spec.seed, 0x0CC1));
    std::vector<Occluder> out;
    constexpr int kSlots = 6;
    for (int i = 0; i < kSlots; ++i) {
        const bool present = rng.bernoulli(spec.occlusion_density);
        Occluder o{rng.uniform_int(1, spec.lane_count), rng.uniform(1.5, 7.0), rng.uniform(-0.15, 0.15),
                   static_cast<std::uint8_t>(rng.uniform_int(110, 170))};
        if (present) out.push_back(o);
    }
    return out;
}

} // namespace

void SceneSpec::validate() const {
    if (lane_count < 1 || lane_count > kMaxLanes) {
        throw std::invalid_argument("scene lane count " + std::to_string(lane_count) + " outside 1..8");
    }
    if (frames < 1) throw std::invalid_argument("scene must have at least one frame");
    if (height < 8 || width < 8) throw std::invalid_argument("scene image too small");
    if (!(occlusion_density >= 0.0 && occlusion_density <= 1.0)) {
        throw std::invalid_argument("occlusion density outside [0, 1]");
    }
    if (schedule.empty() || schedule.front().frame != 0) {
        throw std::invalid_argument("lane schedule must start at frame 0");
    }
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        const auto& c = schedule[i];
        if (c.lane < 1 || c.lane > lane_count) {
            throw std::invalid_argument("schedule lane " + std::to_string(c.lane) + " outside 1.." +
                                        std::to_string(lane_count));
        }
        if (i > 0) {
            if (c.frame <= schedule[i - 1].frame) throw std::invalid_argument("schedule frames must increase");
            if (std::abs(c.lane - schedule[i - 1].lane) != 1) {
                throw std::invalid_argument("schedule change at frame " + std::to_string(c.frame) +
                                            " must move exactly one lane");
            }
        }
    }
    auto sorted = brightness;
    std::sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.start < b.start; });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i].end <= sorted[i].start) throw std::invalid_argument("empty brightness interval");
        if (sorted[i].level < 0 || sorted[i].level > 255) throw std::invalid_argument("ambient level outside 0..255");
        if (i > 0 && sorted[i].start < sorted[i - 1].end) throw std::invalid_argument("brightness intervals overlap");
    }
}

int SceneSpec::ego_lane(int frame) const {
    int lane = schedule.front().lane;
    for (const auto& c : schedule)
        if (c.frame <= frame) lane = c.lane;
    return lane;
}

int SceneSpec::ambient(int frame) const {
    for (const auto& b : brightness)
        if (frame >= b.start && frame < b.end) return b.level;
    return 255;
}

double RoadGeometry::row_t(int row, int height) const {
    const double h = horizon(height);
    return (row + 0.5 - h) / (height - h);
}

double RoadGeometry::boundary_x(int boundary, int ego_lane, int row, int width, int height) const {
    const double offset = boundary - ego_lane + 0.5;
    return width / 2.0 + offset * lane_width_ratio * width * row_t(row, height);
}

double RoadGeometry::line_half_width(int row, int width, int height) const {
    return std::max(0.5, 0.5 * line_width_ratio * lane_width_ratio * width * row_t(row, height));
}

bool RoadGeometry::dash_on(int row, int height, int frame) const {
    const double t = row_t(row, height);
    if (t <= 0.0) return false;
    const double phase = dash_frequency / t + dash_speed * frame;
    return phase - std::floor(phase) < 0.5;
}

Image render_frame(const SceneSpec& spec, int frame_index, int ego_lane) {
    spec.validate();
    if (ego_lane < 1 || ego_lane > spec.lane_count) throw std::invalid_argument("ego lane outside the road");
    const RoadGeometry& g = kGeometry;
    const Palette palette;
    const double ambient = spec.ambient(frame_index);
    const int W = spec.width, H = spec.height;
    const auto sky = shade(palette.sky, ambient);
    const auto ground = shade(palette.ground, ambient);
    const auto asphalt = shade(palette.asphalt, ambient);
    const auto marking = shade(palette.marking, ambient);

    Image img(W, H, sky);
    for (int y = 0; y < H; ++y) {
        if (g.row_t(y, H) <= 0.0) continue;
        const double left = g.boundary_x(0, ego_lane, y, W, H);
        const double right = g.boundary_x(spec.lane_count, ego_lane, y, W, H);
        const double hw = g.line_half_width(y, W, H);
        const bool dash = g.dash_on(y, H, frame_index);
        for (int x = 0; x < W; ++x) {
            const double xc = x + 0.5;
            img.set(x, y, (xc >= left && xc <= right) ? asphalt : ground);
        }
        for (int k = 0; k <= spec.lane_count; ++k) {
            const bool border = k == 0 || k == spec.lane_count;
            if (!border && !dash) continue;
            const double xl = g.boundary_x(k, ego_lane, y, W, H);
            const int x0 = std::max(0, static_cast<int>(std::floor(xl - hw)));
            const int x1 = std::min(W - 1, static_cast<int>(std::floor(xl + hw)));
            for (int x = x0; x <= x1; ++x)
                if (std::fabs(x + 0.5 - xl) <= hw) img.set(x, y, marking);
        }
    }

    auto occluders = draw_occluders(spec);
    constexpr double kNear = 1.3, kSpan = 6.0;
    std::vector<std::pair<double, const Occluder*>> placed;
    for (const auto& o : occluders) {
        double z = std::fmod(o.depth - kNear + o.speed * frame_index, kSpan);
        if (z < 0) z += kSpan;
        placed.emplace_back(kNear + z, &o);
    }
    std::sort(placed.begin(), placed.end(), [](auto& a, auto& b) { return a.first > b.first; });
    for (const auto& [depth, o] : placed) {
        const double t = 1.0 / depth;
        const double lane_px = g.lane_width_ratio * W * t;
        const double bottom = g.horizon(H) + t * (H - g.horizon(H));
        const double cx = W / 2.0 + (o->lane - ego_lane) * lane_px;
        const int x0 = std::max(0, static_cast<int>(std::lround(cx - 0.35 * lane_px)));
        const int x1 = std::min(W - 1, static_cast<int>(std::lround(cx + 0.35 * lane_px)));
        const int y0 = std::max(0, static_cast<int>(std::lround(bottom - 0.55 * lane_px)));
        const int y1 = std::min(H - 1, static_cast<int>(std::lround(bottom)));
        const auto body = shade(std::array<std::uint8_t, 3>{o->gray, o->gray, o->gray}, ambient);
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) img.set(x, y, body);
    }
    return img;
}

SequenceRecord generate_sequence(const SceneSpec& spec) {
    spec.validate();
    SequenceRecord rec;
    rec.spec = spec;
    for (int f = 0; f < spec.frames; ++f) {
        const int ego = spec.ego_lane(f);
        rec.frames.push_back(render_frame(spec, f, ego));
        rec.labels.push_back(LaneLabel::from_left(ego, spec.lane_count));
    }
    return rec;
}

std::string to_string(Profile p) {
    switch (p) {
    case Profile::Train: return "train";
    case Profile::Test: return "test";
    case Profile::TunnelTest: return "tunnel-test";
    }
    return "unknown";
}

Profile profile_from_string(const std::string& name) {
    if (name == "train") return Profile::Train;
    if (name == "test") return Profile::Test;
    if (name == "tunnel-test") return Profile::TunnelTest;
    throw std::invalid_argument("unknown corpus profile '" + name + "' (expected train, test or tunnel-test)");
}

std::string sequence_id(Profile profile, std::uint64_t seed, int index) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s_s%llu_%05d", to_string(profile).c_str(),
                  static_cast<unsigned long long>(seed), index);
    return buf;
}

SceneSpec draw_scene(Profile profile, std::uint64_t seed, int index, const CorpusOptions& options) {
    Rng rng(derive_seed(seed, hash_string(to_string(profile)), static_cast<std::uint64_t>(index)));
    SceneSpec s;
    s.seed = rng.next();
    s.frames = options.frames;
    s.height = options.height;
    s.width = options.width;
    s.lane_count = rng.uniform_int(1, kMaxLanes);

    int lane = rng.uniform_int(1, s.lane_count);
    s.schedule = {{0, lane}};
    if (s.lane_count > 1 && s.frames > 2) {
        const int changes = rng.uniform_int(0, 2);
        int frame = 0;
        for (int i = 0; i < changes; ++i) {
            const int remaining = s.frames - 1 - frame;
            if (remaining < 1) break;
            frame += rng.uniform_int(1, std::min(remaining, std::max(1, s.frames / 2)));
            int step = rng.bernoulli(0.5) ? 1 : -1;
            if (lane + step < 1 || lane + step > s.lane_count) step = -step;
            lane += step;
            s.schedule.push_back({frame, lane});
        }
    }

    s.occlusion_density = rng.uniform(0.0, 0.5);

    if (profile == Profile::TunnelTest) {
        const int outside = rng.uniform_int(170, 255);
        const int entry = std::clamp(rng.uniform_int(s.frames / 4, s.frames / 2), 1, std::max(1, s.frames - 1));
        const int inside = static_cast<int>(std::floor(outside * rng.uniform(0.15, 0.30)));
        s.brightness = {{0, entry, outside}, {entry, s.frames, inside}};
    } else {
        s.brightness = {{0, s.frames, rng.uniform_int(70, 255)}};
    }
    s.validate();
    return s;
}

void make_corpus(Profile profile, int count, std::uint64_t seed, const std::filesystem::path& out,
                 const CorpusOptions& options) {
    namespace fs = std::filesystem;
    if (count < 0) throw std::invalid_argument("corpus count must be non-negative");
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw std::runtime_error("cannot create " + out.string() + ": " + ec.message());

    nlohmann::json ids = nlohmann::json::array();
    for (int i = 0; i < count; ++i) {
        const std::string id = sequence_id(profile, seed, i);
        const fs::path dir = out / id;
        fs::create_directories(dir, ec);
        if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
        const SequenceRecord rec = generate_sequence(draw_scene(profile, seed, i, options));

        std::ofstream labels(dir / "labels.jsonl");
        if (!labels) throw std::runtime_error("cannot write " + (dir / "labels.jsonl").string());
        for (std::size_t f = 0; f < rec.frames.size(); ++f) {
            char name[32];
            std::snprintf(name, sizeof name, "frame_%05zu.ppm", f);
            write_ppm(dir / name, rec.frames[f]);
            const auto& l = rec.labels[f];
            labels << nlohmann::json{{"frame", f}, {"delta_l", l.delta_l}, {"delta_r", l.delta_r},
                                     {"lane_count", l.lane_count}}
                          .dump()
                   << '\n';
        }
        if (!labels) throw std::runtime_error("write failed for " + (dir / "labels.jsonl").string());
        ids.push_back(id);
    }

    const nlohmann::json manifest{{"profile", to_string(profile)},
                                  {"seed", seed},
                                  {"count", count},
                                  {"frames", options.frames},
                                  {"height", options.height},
                                  {"width", options.width},
                                  {"generator_version", kGeneratorVersion},
                                  {"sequences", ids}};
    std::ofstream m(out / "manifest.json");
    if (!m) throw std::runtime_error("cannot write " + (out / "manifest.json").string());
    m << manifest.dump(2) << '\n';
    if (!m) throw std::runtime_error("write failed for " + (out / "manifest.json").string());
}

} // namespace laneid::synth

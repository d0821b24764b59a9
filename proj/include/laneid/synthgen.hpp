#pragma once

#include "laneid/conventions.hpp"
#include "laneid/image.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace laneid::synth {

inline constexpr int kGeneratorVersion = 1;

/// Ego lane from `frame` onwards.
struct LaneChange {
    int frame = 0;
    int lane = 1;
};

/// Ambient level over frames [start, end).
struct BrightnessInterval {
    int start = 0;
    int end = 0;
    int level = 255;
};

struct SceneSpec {
    std::uint64_t seed = 0;
    int lane_count = 1;
    int frames = 16;
    /// First entry must be at frame 0; later entries move one lane at a time.
    std::vector<LaneChange> schedule{{0, 1}};
    /// Frames outside every interval are rendered at ambient 255.
    std::vector<BrightnessInterval> brightness;
    double occlusion_density = 0.0;
    int height = 64;
    int width = 128;

    /// Throws std::invalid_argument describing the first violated invariant.
    void validate() const;
    int ego_lane(int frame) const;
    int ambient(int frame) const;
};

/// Fixed straight-road camera model. Screen position of lane boundary k
/// (0 = left border, lane_count = right border) at row y is
///   x = width/2 + (k - ego + 0.5) * lane_width_ratio * width * t,
///   t = (y + 0.5 - horizon_ratio * height) / (height - horizon_ratio * height).
struct RoadGeometry {
    double horizon_ratio = 0.25;
    double lane_width_ratio = 0.28;
    double line_width_ratio = 0.08; // of the on-screen lane width
    double dash_frequency = 0.5;    // dash cycles per unit of depth 1/t
    double dash_speed = 0.15;       // cycles per frame

    double horizon(int height) const { return horizon_ratio * height; }
    /// Depth parameter t of a row, <= 0 at or above the horizon.
    double row_t(int row, int height) const;
    double boundary_x(int boundary, int ego_lane, int row, int width, int height) const;
    double line_half_width(int row, int width, int height) const;
    bool dash_on(int row, int height, int frame) const;
};

inline constexpr RoadGeometry kGeometry{};

struct Palette {
    std::array<std::uint8_t, 3> sky{150, 180, 215};
    std::array<std::uint8_t, 3> ground{70, 110, 60};
    std::array<std::uint8_t, 3> asphalt{85, 85, 90};
    std::array<std::uint8_t, 3> marking{235, 235, 235};
};

struct SequenceRecord {
    std::vector<Image> frames;
    std::vector<LaneLabel> labels;
    SceneSpec spec;
};

/// Deterministic in (spec, frame_index).
Image render_frame(const SceneSpec& spec, int frame_index, int ego_lane);
SequenceRecord generate_sequence(const SceneSpec& spec);

enum class Profile { Train, Test, TunnelTest };
std::string to_string(Profile p);
Profile profile_from_string(const std::string& name);

struct CorpusOptions {
    int frames = 16;
    int height = 64;
    int width = 128;
};

/// Scene for sequence `index` of a corpus; a pure function of its arguments.
SceneSpec draw_scene(Profile profile, std::uint64_t seed, int index, const CorpusOptions& options = {});

/// Sequence directory name, unique across profiles.
std::string sequence_id(Profile profile, std::uint64_t seed, int index);

/// Writes `count` sequences plus manifest.json under `out`. I/O failures
/// raise std::runtime_error naming the path.
void make_corpus(Profile profile, int count, std::uint64_t seed, const std::filesystem::path& out,
                 const CorpusOptions& options = {});

} // namespace laneid::synth

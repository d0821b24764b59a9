#pragma once

#include "laneid/conventions.hpp"
#include "laneid/harness/config.hpp"
#include "laneid/image.hpp"
#include "laneid/rng.hpp"

#include <vector>

namespace laneid::harness {

struct AugmentedClip {
    std::vector<Image> frames;
    std::vector<LaneLabel> labels;
    bool flipped = false;
};

Image flip_horizontal(const Image& img);

/// Draws one set of transform parameters from `rng` and applies it to every
/// frame: optional horizontal flip (labels mirrored), global brightness
/// factor, additive Gaussian noise, and a symmetric horizontal crop resized
/// back to full width.
AugmentedClip augment(const std::vector<Image>& frames, const std::vector<LaneLabel>& labels,
                      const AugmentConfig& config, Rng& rng);

} // namespace laneid::harness

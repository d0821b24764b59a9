#include "laneid/harness/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace laneid::harness {

Image flip_horizontal(const Image& img) {
    Image out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < 3; ++c) out.channel(img.width() - 1 - x, y, c) = img.channel(x, y, c);
    return out;
}

namespace {

std::uint8_t clamp_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0)); }

// Keeps columns [margin, width - margin) and stretches them back to full width (linear in x).
Image crop_resize(const Image& img, int margin) {
    const int W = img.width();
    const double kept = W - 2.0 * margin;
    Image out(W, img.height());
    for (int x = 0; x < W; ++x) {
        const double src = margin + (x + 0.5) * kept / W - 0.5;
        const int x0 = std::clamp(static_cast<int>(std::floor(src)), 0, W - 1);
        const int x1 = std::min(x0 + 1, W - 1);
        const double a = std::clamp(src - x0, 0.0, 1.0);
        for (int y = 0; y < img.height(); ++y)
            for (int c = 0; c < 3; ++c)
                out.channel(x, y, c) = clamp_byte((1 - a) * img.channel(x0, y, c) + a * img.channel(x1, y, c));
    }
    return out;
}

} // namespace

AugmentedClip augment(const std::vector<Image>& frames, const std::vector<LaneLabel>& labels,
                      const AugmentConfig& config, Rng& rng) {
    if (frames.size() != labels.size()) throw std::invalid_argument("augment: frame and label counts differ");
    AugmentedClip clip{frames, labels, false};

    // Draw every parameter up front so the stream consumption does not depend on which toggles fire.
    const bool flip = rng.bernoulli(config.flip_probability);
    const bool jitter = rng.bernoulli(config.jitter_probability);
    const double factor = rng.uniform(1.0 - config.jitter_range, 1.0 + config.jitter_range);
    const bool noise = rng.bernoulli(config.noise_probability);
    const bool crop = rng.bernoulli(config.crop_probability);
    const double crop_fraction = rng.uniform(0.0, config.crop_max_fraction);

    for (auto& img : clip.frames) {
        if (flip) img = flip_horizontal(img);
        if (crop) {
            const int margin = static_cast<int>(std::lround(crop_fraction * img.width()));
            if (margin > 0 && 2 * margin < img.width()) img = crop_resize(img, margin);
        }
        if (jitter)
            for (auto& v : img.bytes()) v = clamp_byte(v * factor);
        if (noise)
            for (auto& v : img.bytes()) v = clamp_byte(v + config.noise_std * rng.normal());
    }
    if (flip) {
        clip.flipped = true;
        for (auto& l : clip.labels) l = mirror(l);
    }
    return clip;
}

} // namespace laneid::harness

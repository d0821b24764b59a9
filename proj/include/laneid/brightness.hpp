#pragma once

#include "laneid/image.hpp"

#include <cstddef>
#include <deque>
#include <optional>

namespace laneid::brightness {

enum class Measure {
    Luma,   // 0.299 R + 0.587 G + 0.114 B
    RgbMean // (R + G + B) / 3
};

struct BrightnessConfig {
    bool enabled = true;
    /// Only frames darker than this are candidates for adjustment; nullopt means no gate.
    std::optional<double> threshold;
    Measure measure = Measure::Luma;
    /// 0 keeps a cumulative mean; otherwise the mean over the last `window` frames.
    std::size_t window = 0;
    /// Upper bound on the gain applied to a frame.
    double max_gain = 8.0;

    static BrightnessConfig disabled() {
        BrightnessConfig c;
        c.enabled = false;
        return c;
    }
    static BrightnessConfig with_threshold(double b) {
        BrightnessConfig c;
        c.threshold = b;
        return c;
    }
};

/// Mean over pixels of the configured per-pixel brightness, in [0, 255].
double perceived_brightness(const Image& img, Measure measure = Measure::Luma);

/// Running average of perceived brightness over one stream.
class BrightnessTracker {
public:
    explicit BrightnessTracker(BrightnessConfig config = {});

    const BrightnessConfig& config() const noexcept { return config_; }
    double mean() const noexcept { return mean_; }
    std::size_t count() const noexcept { return count_; }

    void update(double b);
    void reset();

private:
    BrightnessConfig config_;
    double mean_ = 0.0;
    std::size_t count_ = 0;
    std::deque<double> recent_;
};

struct Adjustment {
    Image image;
    bool adjusted = false;
    double factor = 1.0;
    double brightness = 0.0; // of the input frame
};

/// Rescales a frame darker than the tracked average by alpha = mean / max(b, 1)
/// (capped at max_gain), clamping channels at 255. The tracker is then updated
/// with the frame's original brightness.
Adjustment adjust(const Image& img, BrightnessTracker& tracker);

} // namespace laneid::brightness

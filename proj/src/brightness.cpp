#include "laneid/brightness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace laneid::brightness {

double perceived_brightness(const Image& img, Measure measure) {
    if (img.empty()) throw std::invalid_argument("perceived_brightness: empty image");
    const auto& px = img.bytes();
    double total = 0.0;
    for (std::size_t i = 0; i < px.size(); i += 3) {
        if (measure == Measure::Luma) total += 0.299 * px[i] + 0.587 * px[i + 1] + 0.114 * px[i + 2];
        else total += (px[i] + px[i + 1] + px[i + 2]) / 3.0;
    }
    return total / static_cast<double>(px.size() / 3);
}

BrightnessTracker::BrightnessTracker(BrightnessConfig config) : config_(config) {
    if (!(config_.max_gain >= 1.0)) throw std::invalid_argument("brightness max_gain must be >= 1");
}

void BrightnessTracker::update(double b) {
    if (!(b >= 0.0 && b <= 255.0)) throw std::invalid_argument("brightness sample outside [0, 255]");
    if (config_.window == 0) {
        mean_ = (mean_ * static_cast<double>(count_) + b) / static_cast<double>(count_ + 1);
    } else {
        recent_.push_back(b);
        if (recent_.size() > config_.window) recent_.pop_front();
        mean_ = std::accumulate(recent_.begin(), recent_.end(), 0.0) / static_cast<double>(recent_.size());
    }
    ++count_;
}

void BrightnessTracker::reset() {
    mean_ = 0.0;
    count_ = 0;
    recent_.clear();
}

Adjustment adjust(const Image& img, BrightnessTracker& tracker) {
    const auto& cfg = tracker.config();
    Adjustment result{img, false, 1.0, perceived_brightness(img, cfg.measure)};
    const double b = result.brightness;
    const bool fire = cfg.enabled && tracker.count() >= 1 && b < tracker.mean() &&
                      (!cfg.threshold || b < *cfg.threshold);
    if (fire) {
        const double alpha = std::min(tracker.mean() / std::max(b, 1.0), cfg.max_gain);
        for (auto& v : result.image.bytes()) v = static_cast<std::uint8_t>(std::min(255.0, std::round(alpha * v)));
        result.adjusted = true;
        result.factor = alpha;
    }
    tracker.update(b);
    return result;
}

} // namespace laneid::brightness

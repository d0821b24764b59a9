#include "laneid/brightness.hpp"
#include "laneid/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace laneid;
using namespace laneid::brightness;

namespace {

Image gray_row(std::initializer_list<std::uint8_t> values) {
    Image img(static_cast<int>(values.size()), 1);
    int x = 0;
    for (auto v : values) img.set(x++, 0, {v, v, v});
    return img;
}

Image random_image(Rng& rng, int w, int h, int lo, int hi) {
    Image img(w, h);
    for (auto& v : img.bytes()) v = static_cast<std::uint8_t>(rng.uniform_int(lo, hi));
    return img;
}

BrightnessTracker primed(double mean, BrightnessConfig cfg = {}) {
    BrightnessTracker t(cfg);
    t.update(mean);
    return t;
}

} // namespace

TEST_SUITE("perceived_brightness") {
    TEST_CASE("examples") {
        CHECK(std::fabs(perceived_brightness(Image(4, 3, {100, 100, 100})) - 100.0) < 1e-9);
        CHECK(std::fabs(perceived_brightness(Image(4, 3, {255, 0, 0})) - 76.245) < 1e-9);
        CHECK(perceived_brightness(Image(4, 3)) == 0.0);
    }

    TEST_CASE("rgb mean measure") {
        CHECK(std::fabs(perceived_brightness(Image(2, 2, {255, 0, 0}), Measure::RgbMean) - 85.0) < 1e-9);
    }

    TEST_CASE("empty image is rejected") { CHECK_THROWS_AS(perceived_brightness(Image{}), std::invalid_argument); }
}

TEST_SUITE("tracker") {
    TEST_CASE("cumulative mean") {
        BrightnessTracker t;
        t.update(120);
        CHECK(t.mean() == 120.0);
        CHECK(t.count() == 1);
        BrightnessTracker u;
        u.update(100);
        u.update(200);
        CHECK(u.mean() == 150.0);
        CHECK(u.count() == 2);
    }

    TEST_CASE("cumulative mean is order-insensitive") {
        const double samples[] = {10, 250, 37.5, 99, 180, 0, 255};
        BrightnessTracker fwd, rev;
        for (double s : samples) fwd.update(s);
        for (auto it = std::rbegin(samples); it != std::rend(samples); ++it) rev.update(*it);
        CHECK(fwd.mean() == doctest::Approx(rev.mean()).epsilon(1e-12));
    }

    TEST_CASE("windowed mean keeps the last samples") {
        BrightnessConfig cfg;
        cfg.window = 2;
        BrightnessTracker t(cfg);
        t.update(100);
        t.update(200);
        t.update(50);
        CHECK(t.mean() == 125.0);
        CHECK(t.count() == 3);
    }

    TEST_CASE("reset and validation") {
        BrightnessTracker t;
        t.update(50);
        t.reset();
        CHECK(t.count() == 0);
        CHECK_THROWS_AS(t.update(300), std::invalid_argument);
        CHECK_THROWS_AS(t.update(-1), std::invalid_argument);
    }
}

TEST_SUITE("adjust") {
    TEST_CASE("alpha 2 doubles and clamps") {
        // mean of the row is 65
        const Image img = gray_row({90, 200, 0, 0, 35});
        auto t = primed(130);
        const auto r = adjust(img, t);
        REQUIRE(r.adjusted);
        CHECK(r.factor == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(r.image.channel(0, 0, 0) == 180);
        CHECK(r.image.channel(1, 0, 1) == 255);
        CHECK(r.image.channel(4, 0, 2) == 70);
    }

    TEST_CASE("frames at or above the mean are unchanged") {
        const Image img(3, 3, {130, 130, 130});
        auto t = primed(130);
        const auto r = adjust(img, t);
        CHECK_FALSE(r.adjusted);
        CHECK(r.image == img);
    }

    TEST_CASE("uniform gray 60 is lifted to the mean 120") {
        auto t = primed(120);
        const auto r = adjust(Image(8, 4, {60, 60, 60}), t);
        REQUIRE(r.adjusted);
        CHECK(std::fabs(perceived_brightness(r.image) - 120.0) < 0.5);
    }

    TEST_CASE("threshold gates candidates") {
        const Image img(2, 2, {80, 80, 80});
        auto gated = primed(150, BrightnessConfig::with_threshold(70));
        CHECK_FALSE(adjust(img, gated).adjusted);
        auto open = primed(150, BrightnessConfig::with_threshold(100));
        CHECK(adjust(img, open).adjusted);
    }

    TEST_CASE("disabled and empty trackers never adjust") {
        const Image img(2, 2, {10, 10, 10});
        auto off = primed(200, BrightnessConfig::disabled());
        CHECK_FALSE(adjust(img, off).adjusted);
        BrightnessTracker fresh;
        CHECK_FALSE(adjust(img, fresh).adjusted);
        CHECK(fresh.count() == 1);
    }

    TEST_CASE("gain is capped and black frames are guarded") {
        auto t = primed(200);
        const auto r = adjust(Image(2, 2, {2, 2, 2}), t);
        CHECK(r.factor == 8.0);
        CHECK(r.image.channel(0, 0, 0) == 16);
        auto u = primed(200);
        const auto black = adjust(Image(2, 2), u);
        CHECK(black.factor == 8.0);
        CHECK(black.image == Image(2, 2));
    }

    TEST_CASE("tracker is updated with the original brightness") {
        auto t = primed(120);
        adjust(Image(2, 2, {60, 60, 60}), t);
        CHECK(t.mean() == doctest::Approx(90.0).epsilon(1e-9));
        CHECK(t.count() == 2);
    }

    TEST_CASE("monotonically brightening stream is never modified") {
        BrightnessTracker t;
        for (int g = 10; g <= 250; g += 20) {
            const Image img(3, 2, {static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(g)});
            const auto r = adjust(img, t);
            CHECK_FALSE(r.adjusted);
            CHECK(r.image == img);
        }
    }

    TEST_CASE("random streams: pixels in range, target hit when unclamped, deterministic") {
        Rng rng(77);
        for (int trial = 0; trial < 100; ++trial) {
            BrightnessTracker a, b;
            const int frames = rng.uniform_int(2, 6);
            for (int f = 0; f < frames; ++f) {
                const int hi = rng.uniform_int(5, 255);
                const Image img = random_image(rng, 6, 4, 0, hi);
                const double mean_before = a.mean();
                const auto ra = adjust(img, a);
                const auto rb = adjust(img, b);
                CHECK(ra.image == rb.image);
                CHECK(ra.adjusted == rb.adjusted);
                if (!ra.adjusted) continue;
                bool clamped = false;
                for (auto v : img.bytes()) clamped |= ra.factor * v > 255.0;
                if (!clamped && ra.factor < 8.0) CHECK(std::fabs(perceived_brightness(ra.image) - mean_before) < 0.5);
            }
        }
    }
}

#include "laneid/model.hpp"
#include "laneid/numerics/gradcheck.hpp"
#include "laneid/numerics/ops.hpp"
#include "laneid/objective.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <string>

using namespace laneid;
using namespace laneid::model;
using num::Shape;
using num::Tensor;
using num::Var;
using test::max_abs_diff;
using test::random_tensor;

namespace {

ModelConfig tiny(Variant v) {
    ModelConfig c;
    c.variant = v;
    c.height = 16;
    c.width = 32;
    c.levels = 2;
    c.channels = {4, 8};
    c.head_hidden = 8;
    return c;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Per-pixel gates with separate input and hidden kernels, 3x3, zero padding.
std::pair<Tensor, Tensor> naive_cell(const Tensor& x, const Tensor& h, const Tensor& c, const Tensor& k, const Tensor& b) {
    const int C = static_cast<int>(x.dim(0)), H = static_cast<int>(x.dim(1)), W = static_cast<int>(x.dim(2));
    auto kernel = [&](int o, int in, int ky, int kx) { return k[((static_cast<std::size_t>(o) * 2 * C + in) * 3 + ky) * 3 + kx]; };
    auto gate = [&](int o, int y, int xx) {
        double s = b[static_cast<std::size_t>(o)];
        for (int ch = 0; ch < C; ++ch)
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    const int iy = y + ky - 1, ix = xx + kx - 1;
                    if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                    s += kernel(o, ch, ky, kx) * x.at(ch, iy, ix);     // W_x * x
                    s += kernel(o, C + ch, ky, kx) * h.at(ch, iy, ix); // W_h * h
                }
        return s;
    };
    Tensor h2(x.shape()), c2(x.shape());
    for (int ch = 0; ch < C; ++ch)
        for (int y = 0; y < H; ++y)
            for (int xx = 0; xx < W; ++xx) {
                const double i = sigmoid(gate(ch, y, xx));
                const double f = sigmoid(gate(C + ch, y, xx));
                const double g = std::tanh(gate(2 * C + ch, y, xx));
                const double o = sigmoid(gate(3 * C + ch, y, xx));
                const double cn = f * c.at(ch, y, xx) + i * g;
                c2.at(ch, y, xx) = cn;
                h2.at(ch, y, xx) = o * std::tanh(cn);
            }
    return {h2, c2};
}

Tensor random_image(const ModelConfig& cfg, Rng& rng) {
    return random_tensor({3, static_cast<std::size_t>(cfg.height), static_cast<std::size_t>(cfg.width)}, rng, 0.0, 1.0);
}

bool outputs_equal(const ModelOutput& a, const ModelOutput& b) {
    return a.left == b.left && a.right == b.right && a.count == b.count;
}

void check_simplex(const Tensor& p) {
    double s = 0.0;
    for (double v : p.data()) {
        CHECK(v >= 0.0);
        s += v;
    }
    CHECK(std::fabs(s - 1.0) < 1e-9);
}

} // namespace

TEST_SUITE("convlstm_cell") {
    TEST_CASE("zero weights and zero memory give zero state") {
        const Shape s{2, 3, 4};
        const CellWeights w{Var::constant(Tensor({8, 4, 3, 3})), Var::constant(Tensor({8}))};
        Rng rng(1);
        const auto out = convlstm_cell(Var::constant(random_tensor(s, rng)), Var::constant(random_tensor(s, rng)),
                                       Var::constant(Tensor(s)), w);
        CHECK(out.c.value() == Tensor(s));
        CHECK(out.h.value() == Tensor(s));
    }

    TEST_CASE("open forget gate keeps the memory") {
        const Shape s{2, 3, 4};
        Tensor bias({8});
        for (std::size_t j = 2; j < 4; ++j) bias[j] = 10.0;
        const CellWeights w{Var::constant(Tensor({8, 4, 3, 3})), Var::constant(bias)};
        Rng rng(2);
        const Tensor c = random_tensor(s, rng);
        const auto out = convlstm_cell(Var::constant(Tensor(s)), Var::constant(Tensor(s)), Var::constant(c), w);
        for (std::size_t i = 0; i < c.size(); ++i) CHECK(std::fabs(out.c.value()[i] - 0.9999546021312976 * c[i]) < 1e-12);
    }

    TEST_CASE("matches the per-pixel oracle") {
        Rng rng(3);
        for (int trial = 0; trial < 5; ++trial) {
            const std::size_t C = static_cast<std::size_t>(rng.uniform_int(1, 3));
            const Shape s{C, static_cast<std::size_t>(rng.uniform_int(2, 6)), static_cast<std::size_t>(rng.uniform_int(2, 6))};
            const Tensor x = random_tensor(s, rng), h = random_tensor(s, rng), c = random_tensor(s, rng);
            const Tensor k = random_tensor({4 * C, 2 * C, 3, 3}, rng, -0.5, 0.5), b = random_tensor({4 * C}, rng);
            const auto out = convlstm_cell(Var::constant(x), Var::constant(h), Var::constant(c), {Var::constant(k), Var::constant(b)});
            const auto [h2, c2] = naive_cell(x, h, c, k, b);
            CHECK(max_abs_diff(out.h.value(), h2) < 1e-12);
            CHECK(max_abs_diff(out.c.value(), c2) < 1e-12);
        }
    }

    TEST_CASE("shape mismatches are rejected") {
        const Var x = Var::constant(Tensor({2, 3, 3}));
        const CellWeights good{Var::constant(Tensor({8, 4, 3, 3})), Var::constant(Tensor({8}))};
        CHECK_THROWS_AS(convlstm_cell(x, Var::constant(Tensor({2, 3, 4})), x, good), num::ShapeError);
        const CellWeights bad{Var::constant(Tensor({8, 2, 3, 3})), Var::constant(Tensor({8}))};
        CHECK_THROWS_AS(convlstm_cell(x, x, x, bad), num::ShapeError);
    }

    TEST_CASE("gradients match finite differences") {
        Rng rng(4);
        const std::vector<Tensor> in{random_tensor({2, 3, 3}, rng), random_tensor({2, 3, 3}, rng), random_tensor({2, 3, 3}, rng),
                                     random_tensor({8, 4, 3, 3}, rng, -0.5, 0.5), random_tensor({8}, rng)};
        auto loss = [](std::span<const Var> v) {
            const auto out = convlstm_cell(v[0], v[1], v[2], {v[3], v[4]});
            return num::add(test::project(out.h, 5), test::project(out.c, 6));
        };
        CHECK(num::grad_check(loss, in, 1e-5).passed(1e-6));
    }
}

TEST_CASE("lstm_cell gradients match finite differences") {
    Rng rng(5);
    const std::vector<Tensor> in{random_tensor({3}, rng), random_tensor({4}, rng), random_tensor({4}, rng),
                                 random_tensor({16, 7}, rng), random_tensor({16}, rng)};
    auto loss = [](std::span<const Var> v) {
        const auto out = lstm_cell(v[0], v[1], v[2], v[3], v[4]);
        return num::add(test::project(out.h, 7), test::project(out.c, 8));
    };
    CHECK(num::grad_check(loss, in, 1e-5).passed(1e-6));
}

TEST_SUITE("config") {
    TEST_CASE("validation") {
        CHECK_NOTHROW(ModelConfig{}.validate());
        ModelConfig c;
        c.levels = 1;
        c.channels = {8};
        CHECK_THROWS_AS(c.validate(), std::invalid_argument);
        c = ModelConfig{};
        c.channels = {8, 16};
        CHECK_THROWS_AS(c.validate(), std::invalid_argument);
        c = ModelConfig{};
        c.height = 60;
        CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("divisible by 8"), std::invalid_argument);
        c = ModelConfig{};
        c.pool_cols = 5;
        CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("must divide the 32x64"), std::invalid_argument);
    }

    TEST_CASE("variant names") {
        for (Variant v : {Variant::Basic, Variant::StdLSTM, Variant::ConvLSTM}) CHECK(variant_from_string(to_string(v)) == v);
        CHECK_THROWS_AS(variant_from_string("gru"), std::invalid_argument);
    }
}

TEST_SUITE("forward") {
    TEST_CASE("outputs are probability vectors for every variant") {
        Rng rng(10);
        for (Variant v : {Variant::Basic, Variant::StdLSTM, Variant::ConvLSTM}) {
            const Moka m(tiny(v));
            const auto params = m.init_params(3);
            const auto cp = constant_params(params);
            auto state = m.reset_state();
            for (int f = 0; f < 3; ++f) {
                const auto out = m.infer(cp, state, random_image(m.config(), rng));
                check_simplex(out.left);
                check_simplex(out.right);
                check_simplex(out.count);
            }
        }
    }

    TEST_CASE("extreme weights still give probability vectors") {
        const Moka m(tiny(Variant::ConvLSTM));
        auto params = m.init_params(4);
        for (auto& p : params)
            for (auto& v : p.value.data()) v *= 50.0;
        auto state = m.reset_state();
        Rng rng(11);
        const auto out = m.infer(constant_params(params), state, random_image(m.config(), rng));
        CHECK(out.left.all_finite());
        check_simplex(out.left);
        check_simplex(out.count);
    }

    TEST_CASE("basic variant is stateless") {
        const Moka m(tiny(Variant::Basic));
        const auto cp = constant_params(m.init_params(5));
        Rng rng(12);
        const Tensor a = random_image(m.config(), rng), b = random_image(m.config(), rng);
        auto state = m.reset_state();
        const auto first = m.infer(cp, state, a);
        m.infer(cp, state, b);
        const auto again = m.infer(cp, state, a);
        CHECK(outputs_equal(first, again));
        CHECK(state.cells.empty());
        CHECK(state.frame == 0);
    }

    TEST_CASE("recurrent variants depend on the previous frame") {
        Rng rng(13);
        for (Variant v : {Variant::ConvLSTM, Variant::StdLSTM}) {
            const Moka m(tiny(v));
            const auto cp = constant_params(m.init_params(6));
            const Tensor a = random_image(m.config(), rng), b = random_image(m.config(), rng);
            auto threaded = m.reset_state();
            m.infer(cp, threaded, a);
            const auto second = m.infer(cp, threaded, b);
            auto fresh = m.reset_state();
            const auto alone = m.infer(cp, fresh, b);
            CHECK(max_abs_diff(second.left, alone.left) > 1e-9);
            CHECK(threaded.frame == 2);
        }
    }

    TEST_CASE("reset state is zero, shaped by the config, and idempotent") {
        const Moka m(tiny(Variant::ConvLSTM));
        const auto s = m.reset_state();
        REQUIRE(s.cells.size() == 2);
        CHECK(s.cells[0].h.shape() == Shape{4, 8, 16});
        CHECK(s.cells[1].c.shape() == Shape{8, 4, 8});
        CHECK(s.cells[1].h.value() == Tensor({8, 4, 8}));
        CHECK(s.frame == 0);
        const auto again = m.reset_state();
        CHECK(again.cells[0].h.value() == s.cells[0].h.value());
        const Moka std_model(tiny(Variant::StdLSTM));
        CHECK(std_model.reset_state().cells.size() == 3);
        CHECK(std_model.reset_state().cells[0].h.shape() == Shape{8});
    }

    TEST_CASE("reset then forward equals a fresh model instance") {
        const Moka m(tiny(Variant::ConvLSTM));
        const auto params = m.init_params(7);
        const auto cp = constant_params(params);
        Rng rng(14);
        const Tensor a = random_image(m.config(), rng), b = random_image(m.config(), rng);
        auto state = m.reset_state();
        m.infer(cp, state, a);
        state = m.reset_state();
        const auto after_reset = m.infer(cp, state, b);
        const Moka other(tiny(Variant::ConvLSTM));
        auto fresh = other.reset_state();
        CHECK(outputs_equal(after_reset, other.infer(constant_params(other.init_params(7)), fresh, b)));
    }

    TEST_CASE("graph-building unroll equals threaded inference bitwise") {
        const Moka m(tiny(Variant::ConvLSTM));
        const auto params = m.init_params(8);
        const auto leaves = params.bind();
        const auto cp = constant_params(params);
        Rng rng(15);
        RecurrentState graph_state = m.reset_state(), plain_state = m.reset_state();
        for (int f = 0; f < 4; ++f) {
            const Tensor img = random_image(m.config(), rng);
            auto [out, next] = m.forward_frame(leaves, graph_state, Var::constant(img));
            graph_state = std::move(next);
            CHECK(outputs_equal(out.probabilities(), m.infer(cp, plain_state, img)));
        }
    }

    TEST_CASE("mismatched inputs are rejected") {
        const Moka m(tiny(Variant::ConvLSTM));
        const auto cp = constant_params(m.init_params(1));
        auto state = m.reset_state();
        CHECK_THROWS_AS(m.infer(cp, state, Tensor({3, 16, 16})), num::ShapeError);
        RecurrentState wrong = Moka(tiny(Variant::StdLSTM)).reset_state();
        CHECK_THROWS_AS(m.infer(cp, wrong, Tensor({3, 16, 32})), std::invalid_argument);
        auto params = m.init_params(1);
        CHECK_NOTHROW(m.check_params(params));
        CHECK_THROWS_AS(Moka(tiny(Variant::Basic)).check_params(params), std::invalid_argument);
    }
}

TEST_SUITE("init") {
    TEST_CASE("same seed is bit-identical, different seeds differ") {
        const Moka m(ModelConfig{});
        CHECK(m.init_params(42) == m.init_params(42));
        CHECK_FALSE(m.init_params(42) == m.init_params(43));
    }

    TEST_CASE("empirical std is within 20% of the fan-in target on large tensors") {
        const Moka m(ModelConfig{});
        const auto params = m.init_params(9);
        int checked = 0;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const Tensor& t = params[i].value;
            if (t.rank() == 1 || t.size() < 1000) continue;
            double mean = 0.0, sq = 0.0;
            for (double v : t.data()) mean += v;
            mean /= static_cast<double>(t.size());
            for (double v : t.data()) sq += (v - mean) * (v - mean);
            const double std = std::sqrt(sq / static_cast<double>(t.size()));
            INFO(params[i].name);
            CHECK(std::fabs(std / m.init_std(i) - 1.0) < 0.2);
            ++checked;
        }
        CHECK(checked >= 5);
    }

    TEST_CASE("recurrent biases open the forget gate") {
        const Moka m(tiny(Variant::ConvLSTM));
        const auto params = m.init_params(1);
        const Tensor& b = params[*params.find("cell0.b")].value;
        for (std::size_t j = 0; j < 16; ++j) CHECK(b[j] == ((j >= 4 && j < 8) ? 1.0 : 0.0));
    }
}

// Central differences on a loss near 20 carry about 5e-10 of absolute roundoff at eps 1e-5,
// so coordinates are compared with a relative tolerance plus an absolute floor above that noise.
TEST_CASE("full-model gradients agree with central differences on the tiny config over two frames") {
    for (Variant v : {Variant::ConvLSTM, Variant::StdLSTM, Variant::Basic}) {
        const Moka m(tiny(v));
        const auto params = m.init_params(3);
        std::vector<Tensor> values;
        for (const auto& p : params) values.push_back(p.value);
        Rng rng(22);
        const Tensor frames[2] = {random_image(m.config(), rng), random_image(m.config(), rng)};
        const LaneLabel labels[2] = {LaneLabel::from_left(2, 4), LaneLabel::from_left(3, 4)};
        auto loss = [&](std::span<const Var> p) {
            RecurrentState state = m.reset_state();
            Var total = Var::constant(Tensor::scalar(0.0));
            for (int f = 0; f < 2; ++f) {
                auto [out, next] = m.forward_frame(p, state, Var::constant(frames[f]));
                total = num::add(total, objective::total_loss(out, labels[f]).total);
                state = std::move(next);
            }
            return total;
        };
        const auto analytic = num::analytic_gradients(loss, values);
        const auto numeric = num::numeric_gradients(loss, values, 1e-5);
        double worst = 0.0;
        std::string where;
        for (std::size_t t = 0; t < values.size(); ++t)
            for (std::size_t i = 0; i < values[t].size(); ++i) {
                const double a = analytic[t][i], n = numeric[t][i];
                const double ratio = std::fabs(a - n) / (1e-4 * std::max(std::fabs(a), std::fabs(n)) + 1e-8);
                if (ratio > worst) {
                    worst = ratio;
                    where = params[t].name + "[" + std::to_string(i) + "]";
                }
            }
        const auto strict = num::compare_gradients(analytic, numeric);
        INFO(to_string(v) << ": tolerance ratio " << worst << " at " << where << "; plain relative error "
                          << strict.max_relative_error);
        CHECK(worst < 1.0);
    }
}

#include "laneid/numerics/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

namespace laneid::num {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

ConstVecMap as_vec(const Tensor& t) { return {t.data().data(), static_cast<Eigen::Index>(t.size())}; }
VecMap as_vec(Tensor& t) { return {t.data().data(), static_cast<Eigen::Index>(t.size())}; }

detail::Node& parent(detail::Node& n, std::size_t i) { return *n.parents[i]; }

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         to_string(t.shape()));
    }
}

struct ConvGeometry {
    std::size_t in_channels, height, width;
    std::size_t out_channels, ksize;
    std::size_t stride, padding;
    std::size_t out_height, out_width;

    std::size_t col_rows() const { return in_channels * ksize * ksize; }
    std::size_t col_cols() const { return out_height * out_width; }
};

ConvGeometry conv_geometry(const Tensor& x, const Tensor& k, int stride, int padding) {
    require_rank(x, 3, "conv2d input");
    require_rank(k, 4, "conv2d kernels");
    if (stride < 1) throw ShapeError("conv2d: stride must be >= 1, got " + std::to_string(stride));
    if (padding < 0) throw ShapeError("conv2d: padding must be >= 0, got " + std::to_string(padding));
    if (k.dim(1) != x.dim(0)) {
        throw ShapeError("conv2d: kernel input-channel dimension " + std::to_string(k.dim(1)) +
                         " does not match input channel dimension " + std::to_string(x.dim(0)));
    }
    if (k.dim(2) != k.dim(3)) {
        throw ShapeError("conv2d: kernel height " + std::to_string(k.dim(2)) + " differs from kernel width " +
                         std::to_string(k.dim(3)));
    }
    if (k.dim(2) % 2 == 0) {
        throw ShapeError("conv2d: kernel size dimension must be odd, got " + std::to_string(k.dim(2)));
    }
    ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), k.dim(0), k.dim(2),
                   static_cast<std::size_t>(stride), static_cast<std::size_t>(padding), 0, 0};
    auto out_size = [&](std::size_t n, const char* axis) {
        const std::size_t padded = n + 2 * g.padding;
        if (padded < g.ksize) {
            throw ShapeError(std::string("conv2d: input ") + axis + " dimension " + std::to_string(n) +
                             " with padding " + std::to_string(padding) + " is smaller than kernel size " +
                             std::to_string(g.ksize));
        }
        return (padded - g.ksize) / g.stride + 1;
    };
    g.out_height = out_size(g.height, "height");
    g.out_width = out_size(g.width, "width");
    return g;
}

void im2col(const double* x, const ConvGeometry& g, double* col) {
    const auto k = g.ksize;
    const auto pad = static_cast<std::ptrdiff_t>(g.padding);
    const auto H = static_cast<std::ptrdiff_t>(g.height);
    const auto W = static_cast<std::ptrdiff_t>(g.width);
    for (std::size_t c = 0; c < g.in_channels; ++c) {
        const double* plane = x + c * g.height * g.width;
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                double* row = col + ((c * k + ky) * k + kx) * g.col_cols();
                for (std::size_t oy = 0; oy < g.out_height; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - pad;
                    double* dst = row + oy * g.out_width;
                    if (iy < 0 || iy >= H) {
                        std::fill(dst, dst + g.out_width, 0.0);
                        continue;
                    }
                    const double* src = plane + iy * W;
                    for (std::size_t ox = 0; ox < g.out_width; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - pad;
                        dst[ox] = (ix >= 0 && ix < W) ? src[ix] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_add(const double* col, const ConvGeometry& g, double* dx) {
    const auto k = g.ksize;
    const auto pad = static_cast<std::ptrdiff_t>(g.padding);
    const auto H = static_cast<std::ptrdiff_t>(g.height);
    const auto W = static_cast<std::ptrdiff_t>(g.width);
    for (std::size_t c = 0; c < g.in_channels; ++c) {
        double* plane = dx + c * g.height * g.width;
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                const double* row = col + ((c * k + ky) * k + kx) * g.col_cols();
                for (std::size_t oy = 0; oy < g.out_height; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - pad;
                    if (iy < 0 || iy >= H) continue;
                    const double* src = row + oy * g.out_width;
                    double* dst = plane + iy * W;
                    for (std::size_t ox = 0; ox < g.out_width; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - pad;
                        if (ix >= 0 && ix < W) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

Var conv2d_impl(const Var& input, const Var& kernels, const Var* bias, int stride, int padding) {
    const Tensor& x = input.value();
    const Tensor& k = kernels.value();
    const ConvGeometry g = conv_geometry(x, k, stride, padding);
    if (bias) {
        require_rank(bias->value(), 1, "conv2d bias");
        if (bias->value().dim(0) != g.out_channels) {
            throw ShapeError("conv2d: bias dimension " + std::to_string(bias->value().dim(0)) +
                             " does not match kernel output-channel dimension " + std::to_string(g.out_channels));
        }
    }

    const auto rows = static_cast<Eigen::Index>(g.col_rows());
    const auto cols = static_cast<Eigen::Index>(g.col_cols());
    const auto cout = static_cast<Eigen::Index>(g.out_channels);

    Buffer col(g.col_rows() * g.col_cols());
    im2col(x.data().data(), g, col.data());

    Tensor out({g.out_channels, g.out_height, g.out_width});
    MatMap out_m(out.data().data(), cout, cols);
    ConstMatMap k_m(k.data().data(), cout, rows);
    ConstMatMap col_m(col.data(), rows, cols);
    out_m.noalias() = k_m * col_m;
    if (bias) out_m.colwise() += as_vec(bias->value());

    std::vector<Var> inputs{input, kernels};
    if (bias) inputs.push_back(*bias);
    const bool has_bias = bias != nullptr;

    return Var::from_op(std::move(out), std::move(inputs), [g, has_bias](detail::Node& self) {
        const auto rows = static_cast<Eigen::Index>(g.col_rows());
        const auto cols = static_cast<Eigen::Index>(g.col_cols());
        const auto cout = static_cast<Eigen::Index>(g.out_channels);
        detail::Node& xin = parent(self, 0);
        detail::Node& kin = parent(self, 1);
        ConstMatMap dout(self.grad.data().data(), cout, cols);

        if (kin.requires_grad) {
            Buffer col(g.col_rows() * g.col_cols());
            im2col(xin.value.data().data(), g, col.data());
            MatMap dk(kin.grad_buffer().data().data(), cout, rows);
            dk.noalias() += dout * ConstMatMap(col.data(), rows, cols).transpose();
        }
        if (xin.requires_grad) {
            Buffer dcol(g.col_rows() * g.col_cols());
            MatMap dcol_m(dcol.data(), rows, cols);
            dcol_m.noalias() = ConstMatMap(kin.value.data().data(), cout, rows).transpose() * dout;
            col2im_add(dcol.data(), g, xin.grad_buffer().data().data());
        }
        if (has_bias) {
            detail::Node& bin = parent(self, 2);
            if (bin.requires_grad) as_vec(bin.grad_buffer()) += dout.rowwise().sum();
        }
    });
}

template <typename Fwd, typename Deriv>
Var unary(const Var& a, Fwd fwd, Deriv deriv_from_output) {
    Tensor out = a.value();
    for (auto& v : out.data()) v = fwd(v);
    return Var::from_op(std::move(out), {a}, [deriv_from_output](detail::Node& self) {
        detail::Node& in = parent(self, 0);
        auto& g = in.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i] * deriv_from_output(in.value[i], self.value[i]);
        }
    });
}

double logistic(double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

} // namespace

Var conv2d(const Var& input, const Var& kernels, int stride, int padding) {
    return conv2d_impl(input, kernels, nullptr, stride, padding);
}

Var conv2d(const Var& input, const Var& kernels, const Var& bias, int stride, int padding) {
    return conv2d_impl(input, kernels, &bias, stride, padding);
}

Var add(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    as_vec(out) += as_vec(b.value());
    return Var::from_op(std::move(out), {a, b}, [](detail::Node& self) {
        for (std::size_t i = 0; i < 2; ++i) {
            auto& p = parent(self, i);
            if (p.requires_grad) as_vec(p.grad_buffer()) += as_vec(self.grad);
        }
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "sub");
    Tensor out = a.value();
    as_vec(out) -= as_vec(b.value());
    return Var::from_op(std::move(out), {a, b}, [](detail::Node& self) {
        auto& pa = parent(self, 0);
        auto& pb = parent(self, 1);
        if (pa.requires_grad) as_vec(pa.grad_buffer()) += as_vec(self.grad);
        if (pb.requires_grad) as_vec(pb.grad_buffer()) -= as_vec(self.grad);
    });
}

Var hadamard(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "hadamard");
    Tensor out = a.value();
    as_vec(out).array() *= as_vec(b.value()).array();
    return Var::from_op(std::move(out), {a, b}, [](detail::Node& self) {
        auto& pa = parent(self, 0);
        auto& pb = parent(self, 1);
        if (pa.requires_grad) as_vec(pa.grad_buffer()).array() += as_vec(self.grad).array() * as_vec(pb.value).array();
        if (pb.requires_grad) as_vec(pb.grad_buffer()).array() += as_vec(self.grad).array() * as_vec(pa.value).array();
    });
}

Var scale(const Var& a, double factor) {
    Tensor out = a.value();
    as_vec(out) *= factor;
    return Var::from_op(std::move(out), {a}, [factor](detail::Node& self) {
        as_vec(parent(self, 0).grad_buffer()) += factor * as_vec(self.grad);
    });
}

Var add_constant(const Var& a, double offset) {
    Tensor out = a.value();
    as_vec(out).array() += offset;
    return Var::from_op(std::move(out), {a}, [](detail::Node& self) {
        as_vec(parent(self, 0).grad_buffer()) += as_vec(self.grad);
    });
}

Var sigmoid(const Var& a) {
    return unary(a, logistic, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& a) {
    return unary(a, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(const Var& a) {
    return unary(a, [](double v) { return v > 0.0 ? v : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var abs(const Var& a) {
    return unary(a, [](double v) { return std::fabs(v); },
                 [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var elementwise(Pointwise op, const Var& a) {
    switch (op) {
    case Pointwise::Sigmoid: return sigmoid(a);
    case Pointwise::Tanh: return tanh(a);
    case Pointwise::Relu: return relu(a);
    }
    throw std::invalid_argument("unknown pointwise op");
}

Var elementwise(Binary op, const Var& a, const Var& b) {
    switch (op) {
    case Binary::Hadamard: return hadamard(a, b);
    case Binary::Add: return add(a, b);
    }
    throw std::invalid_argument("unknown binary op");
}

Var linear(const Var& input, const Var& weight, const Var& bias) {
    const Tensor& x = input.value();
    const Tensor& w = weight.value();
    const Tensor& b = bias.value();
    require_rank(x, 1, "linear input");
    require_rank(w, 2, "linear weight");
    require_rank(b, 1, "linear bias");
    if (w.dim(1) != x.dim(0)) {
        throw ShapeError("linear: weight column dimension " + std::to_string(w.dim(1)) +
                         " does not match input dimension " + std::to_string(x.dim(0)));
    }
    if (b.dim(0) != w.dim(0)) {
        throw ShapeError("linear: bias dimension " + std::to_string(b.dim(0)) +
                         " does not match weight row dimension " + std::to_string(w.dim(0)));
    }
    const auto m = static_cast<Eigen::Index>(w.dim(0));
    const auto n = static_cast<Eigen::Index>(w.dim(1));
    Tensor out({w.dim(0)});
    as_vec(out).noalias() = ConstMatMap(w.data().data(), m, n) * as_vec(x) + as_vec(b);
    return Var::from_op(std::move(out), {input, weight, bias}, [m, n](detail::Node& self) {
        auto& px = parent(self, 0);
        auto& pw = parent(self, 1);
        auto& pb = parent(self, 2);
        if (px.requires_grad) {
            as_vec(px.grad_buffer()).noalias() += ConstMatMap(pw.value.data().data(), m, n).transpose() * as_vec(self.grad);
        }
        if (pw.requires_grad) {
            MatMap(pw.grad_buffer().data().data(), m, n).noalias() += as_vec(self.grad) * as_vec(px.value).transpose();
        }
        if (pb.requires_grad) as_vec(pb.grad_buffer()) += as_vec(self.grad);
    });
}

Var softmax(const Var& logits) {
    const Tensor& z = logits.value();
    require_rank(z, 1, "softmax");
    Tensor out = z;
    const double shift = *std::max_element(out.data().begin(), out.data().end());
    double total = 0.0;
    for (auto& v : out.data()) {
        v = std::exp(v - shift);
        total += v;
    }
    for (auto& v : out.data()) v /= total;
    return Var::from_op(std::move(out), {logits}, [](detail::Node& self) {
        const double inner = as_vec(self.grad).dot(as_vec(self.value));
        as_vec(parent(self, 0).grad_buffer()).array() +=
            as_vec(self.value).array() * (as_vec(self.grad).array() - inner);
    });
}

Var log_clamped(const Var& a, double eps) {
    return unary(a, [eps](double v) { return std::log(std::max(v, eps)); },
                 [eps](double x, double) { return x >= eps ? 1.0 / x : 0.0; });
}

Var sum(const Var& a) {
    return Var::from_op(Tensor::scalar(as_vec(a.value()).sum()), {a}, [](detail::Node& self) {
        as_vec(parent(self, 0).grad_buffer()).array() += self.grad[0];
    });
}

Var dot_constant(const Var& a, const Tensor& weights) {
    require_same_shape(a.value(), weights, "dot_constant");
    return Var::from_op(Tensor::scalar(as_vec(a.value()).dot(as_vec(weights))), {a},
                        [weights](detail::Node& self) {
                            as_vec(parent(self, 0).grad_buffer()) += self.grad[0] * as_vec(weights);
                        });
}

Var concat_channels(std::span<const Var> maps) {
    if (maps.empty()) throw ShapeError("concat_channels: no inputs");
    const Tensor& first = maps.front().value();
    require_rank(first, 3, "concat_channels");
    std::size_t channels = 0;
    for (const auto& m : maps) {
        require_rank(m.value(), 3, "concat_channels");
        if (m.value().dim(1) != first.dim(1) || m.value().dim(2) != first.dim(2)) {
            throw ShapeError("concat_channels: spatial shape " + to_string(m.shape()) + " differs from " +
                             to_string(first.shape()));
        }
        channels += m.value().dim(0);
    }
    Tensor out({channels, first.dim(1), first.dim(2)});
    std::size_t offset = 0;
    for (const auto& m : maps) {
        std::copy(m.value().data().begin(), m.value().data().end(), out.data().begin() + offset);
        offset += m.value().size();
    }
    return Var::from_op(std::move(out), std::vector<Var>(maps.begin(), maps.end()), [](detail::Node& self) {
        std::size_t offset = 0;
        for (auto& p : self.parents) {
            const std::size_t n = p->value.size();
            if (p->requires_grad) {
                auto& g = p->grad_buffer();
                for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
            }
            offset += n;
        }
    });
}

Var slice_channels(const Var& map, std::size_t begin, std::size_t count) {
    const Tensor& x = map.value();
    require_rank(x, 3, "slice_channels");
    if (count == 0 || begin + count > x.dim(0)) {
        throw ShapeError("slice_channels: range [" + std::to_string(begin) + "," + std::to_string(begin + count) +
                         ") exceeds channel dimension " + std::to_string(x.dim(0)));
    }
    const std::size_t plane = x.dim(1) * x.dim(2);
    Tensor out({count, x.dim(1), x.dim(2)});
    std::copy_n(x.data().begin() + begin * plane, count * plane, out.data().begin());
    return Var::from_op(std::move(out), {map}, [begin, plane](detail::Node& self) {
        auto& g = parent(self, 0).grad_buffer();
        const std::size_t off = begin * plane;
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[off + i] += self.grad[i];
    });
}

Var concat_vectors(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_vectors: no inputs");
    std::vector<double> data;
    for (const auto& p : parts) {
        require_rank(p.value(), 1, "concat_vectors");
        data.insert(data.end(), p.value().data().begin(), p.value().data().end());
    }
    return Var::from_op(Tensor::vector(std::move(data)), std::vector<Var>(parts.begin(), parts.end()),
                        [](detail::Node& self) {
                            std::size_t offset = 0;
                            for (auto& p : self.parents) {
                                const std::size_t n = p->value.size();
                                if (p->requires_grad) {
                                    auto& g = p->grad_buffer();
                                    for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
                                }
                                offset += n;
                            }
                        });
}

Var slice_vector(const Var& v, std::size_t begin, std::size_t count) {
    require_rank(v.value(), 1, "slice_vector");
    if (count == 0 || begin + count > v.value().dim(0)) {
        throw ShapeError("slice_vector: range exceeds dimension " + std::to_string(v.value().dim(0)));
    }
    std::vector<double> data(v.value().data().begin() + begin, v.value().data().begin() + begin + count);
    return Var::from_op(Tensor::vector(std::move(data)), {v}, [begin](detail::Node& self) {
        auto& g = parent(self, 0).grad_buffer();
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin + i] += self.grad[i];
    });
}

Var upsample_nearest2x(const Var& map) {
    const Tensor& x = map.value();
    require_rank(x, 3, "upsample_nearest2x");
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    Tensor out({C, 2 * H, 2 * W});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < 2 * H; ++y)
            for (std::size_t xx = 0; xx < 2 * W; ++xx) out.at(c, y, xx) = x.at(c, y / 2, xx / 2);
    return Var::from_op(std::move(out), {map}, [C, H, W](detail::Node& self) {
        auto& g = parent(self, 0).grad_buffer();
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t y = 0; y < 2 * H; ++y)
                for (std::size_t xx = 0; xx < 2 * W; ++xx) g.at(c, y / 2, xx / 2) += self.grad.at(c, y, xx);
    });
}

Var global_avg_pool(const Var& map) {
    const Tensor& x = map.value();
    require_rank(x, 3, "global_avg_pool");
    const std::size_t C = x.dim(0), plane = x.dim(1) * x.dim(2);
    Tensor out({C});
    for (std::size_t c = 0; c < C; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < plane; ++i) s += x[c * plane + i];
        out[c] = s / static_cast<double>(plane);
    }
    return Var::from_op(std::move(out), {map}, [C, plane](detail::Node& self) {
        auto& g = parent(self, 0).grad_buffer();
        for (std::size_t c = 0; c < C; ++c) {
            const double d = self.grad[c] / static_cast<double>(plane);
            for (std::size_t i = 0; i < plane; ++i) g[c * plane + i] += d;
        }
    });
}

Var grid_avg_pool(const Var& map, std::size_t rows, std::size_t cols) {
    const Tensor& x = map.value();
    require_rank(x, 3, "grid_avg_pool");
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    if (rows == 0 || cols == 0 || H % rows != 0 || W % cols != 0) {
        throw ShapeError("grid_avg_pool: " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " grid does not divide map " + to_string(x.shape()));
    }
    const std::size_t ch = H / rows, cw = W / cols;
    const double inv = 1.0 / static_cast<double>(ch * cw);
    Tensor out({C * rows * cols});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t xx = 0; xx < W; ++xx) out[(c * rows + y / ch) * cols + xx / cw] += x[(c * H + y) * W + xx];
    for (auto& v : out.data()) v *= inv;
    return Var::from_op(std::move(out), {map}, [C, H, W, rows, cols, ch, cw, inv](detail::Node& self) {
        auto& g = parent(self, 0).grad_buffer();
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t xx = 0; xx < W; ++xx)
                    g[(c * H + y) * W + xx] += self.grad[(c * rows + y / ch) * cols + xx / cw] * inv;
    });
}

} // namespace laneid::num

#pragma once

#include "laneid/numerics/autodiff.hpp"

#include <span>

namespace laneid::num {

/// 2-D cross-correlation of a [C_in,H,W] input with [C_out,C_in,k,k] kernels.
///
/// Output size per spatial axis is floor((n + 2*padding - k) / stride) + 1.
/// Kernels must be square with odd size. Throws ShapeError naming the
/// offending dimension on any mismatch.
Var conv2d(const Var& input, const Var& kernels, int stride, int padding);
/// Same as above with a per-output-channel bias of shape [C_out].
Var conv2d(const Var& input, const Var& kernels, const Var& bias, int stride, int padding);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var add_constant(const Var& a, double offset);

Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var relu(const Var& a);
Var abs(const Var& a);

enum class Pointwise { Sigmoid, Tanh, Relu };
enum class Binary { Hadamard, Add };
Var elementwise(Pointwise op, const Var& a);
Var elementwise(Binary op, const Var& a, const Var& b);

/// weight [m,n] times input [n] plus bias [m].
Var linear(const Var& input, const Var& weight, const Var& bias);

/// Max-shifted softmax over a 1-D tensor.
Var softmax(const Var& logits);

/// log(max(x, eps)) elementwise; gradient is zero where x < eps.
Var log_clamped(const Var& a, double eps);
/// Sum over all elements, returned as shape [1].
Var sum(const Var& a);
/// Inner product of a with a constant tensor of the same shape, as shape [1].
Var dot_constant(const Var& a, const Tensor& weights);

/// Channel-wise concatenation of [C_i,H,W] maps sharing H and W.
Var concat_channels(std::span<const Var> maps);
/// Channels [begin, begin+count) of a [C,H,W] map.
Var slice_channels(const Var& map, std::size_t begin, std::size_t count);
/// Concatenation of 1-D tensors.
Var concat_vectors(std::span<const Var> parts);
/// Elements [begin, begin+count) of a 1-D tensor.
Var slice_vector(const Var& v, std::size_t begin, std::size_t count);

/// Nearest-neighbour 2x upsampling of a [C,H,W] map to [C,2H,2W].
Var upsample_nearest2x(const Var& map);
/// Mean over H and W of a [C,H,W] map, giving [C].
Var global_avg_pool(const Var& map);
/// Mean over each cell of a rows x cols grid laid on a [C,H,W] map, giving
/// [C*rows*cols] in (c, row, col) order. H and W must be divisible by the grid.
Var grid_avg_pool(const Var& map, std::size_t rows, std::size_t cols);

} // namespace laneid::num

#pragma once

#include "laneid/numerics/tensor.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace laneid::num {

namespace detail {

struct Node {
    Tensor value;
    Tensor grad; // allocated on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Propagates this->grad into the parents' grads.
    std::function<void(Node&)> backprop;

    Tensor& grad_buffer();
};

} // namespace detail

/// Handle to a value in a reverse-mode computation graph.
///
/// Vars are cheap to copy (shared ownership of the node). A graph is built
/// by applying the operations in ops.hpp; calling backward() on a scalar
/// result accumulates gradients into every reachable leaf that requires them.
class Var {
public:
    Var() = default;

    /// Value that takes no gradient.
    static Var constant(Tensor value);
    /// Leaf whose gradient is accumulated by backward().
    static Var leaf(Tensor value);

    /// Internal constructor used by operations.
    static Var from_op(Tensor value, std::vector<Var> inputs, std::function<void(detail::Node&)> backprop);

    bool valid() const noexcept { return node_ != nullptr; }
    const Tensor& value() const;
    /// Accumulated gradient; zeros of the value's shape if nothing reached this node.
    Tensor grad() const;
    bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
    const Shape& shape() const { return value().shape(); }

    detail::Node& node() const { return *node_; }

private:
    std::shared_ptr<detail::Node> node_;
};

/// Runs reverse-mode accumulation from a single-element root, seeding d(root) = 1.
void backward(const Var& root);

} // namespace laneid::num

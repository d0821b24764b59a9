#include "laneid/numerics/autodiff.hpp"

#include <unordered_set>
#include <utility>

namespace laneid::num {

Tensor& detail::Node::grad_buffer() {
    if (grad.empty()) grad = Tensor(value.shape(), 0.0);
    return grad;
}

Var Var::constant(Tensor value) {
    Var v;
    v.node_ = std::make_shared<detail::Node>();
    v.node_->value = std::move(value);
    return v;
}

Var Var::leaf(Tensor value) {
    Var v = constant(std::move(value));
    v.node_->requires_grad = true;
    return v;
}

Var Var::from_op(Tensor value, std::vector<Var> inputs, std::function<void(detail::Node&)> backprop) {
    Var v;
    v.node_ = std::make_shared<detail::Node>();
    v.node_->value = std::move(value);
    for (auto& in : inputs) {
        if (in.requires_grad()) v.node_->requires_grad = true;
        v.node_->parents.push_back(std::move(in.node_));
    }
    if (v.node_->requires_grad) v.node_->backprop = std::move(backprop);
    else v.node_->parents.clear();
    return v;
}

const Tensor& Var::value() const {
    if (!node_) throw std::logic_error("value() on an empty Var");
    return node_->value;
}

Tensor Var::grad() const {
    if (!node_) throw std::logic_error("grad() on an empty Var");
    if (node_->grad.empty()) return Tensor(node_->value.shape(), 0.0);
    return node_->grad;
}

void backward(const Var& root) {
    if (!root.valid()) throw std::logic_error("backward() on an empty Var");
    if (root.value().size() != 1) {
        throw ShapeError("backward() requires a single-element root, got " + to_string(root.shape()));
    }
    if (!root.requires_grad()) return;

    // Iterative post-order DFS gives a topological order.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(&root.node(), 0);
    seen.insert(&root.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            detail::Node* parent = node->parents[next++].get();
            if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.node().grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* node = *it;
        if (node->backprop && !node->grad.empty()) node->backprop(*node);
    }
}

} // namespace laneid::num

// Copyright 2026 The rdshift Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "rdshift/tensor.hpp"

namespace rdshift {

template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated lazily during backward
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this->grad and accumulates into the parents' grads.
    std::function<void(Node&)> backward_fn;

    Tensor<T>& grad_buffer() {
        if (grad.numel() != value.numel()) grad = Tensor<T>(value.shape());
        return grad;
    }
};

// Handle to a node in a dynamically built computation graph. Copies share the node.
template <typename T>
class Var {
public:
    Var() = default;
    explicit Var(Tensor<T> value, bool requires_grad = false) : node_(std::make_shared<Node<T>>()) {
        node_->value = std::move(value);
        node_->requires_grad = requires_grad;
    }

    static Var make(Tensor<T> value, std::vector<Var> parents, std::function<void(Node<T>&)> fn) {
        Var out(std::move(value));
        bool any = false;
        for (const auto& p : parents) any = any || p.requires_grad();
        if (any) {
            out.node_->requires_grad = true;
            for (auto& p : parents) out.node_->parents.push_back(p.node_);
            out.node_->backward_fn = std::move(fn);
        }
        return out;
    }

    bool defined() const { return node_ != nullptr; }
    const Tensor<T>& value() const { return node_->value; }
    Tensor<T>& mutable_value() { return node_->value; }
    const Tensor<T>& grad() const { return node_->grad; }
    bool has_grad() const { return node_->grad.numel() == node_->value.numel(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    void set_requires_grad(bool r) { node_->requires_grad = r; }
    const Shape& shape() const { return node_->value.shape(); }
    int dim(std::size_t i) const { return node_->value.dim(i); }
    std::size_t numel() const { return node_->value.numel(); }
    T item() const { return node_->value[0]; }
    Node<T>* node() const { return node_.get(); }

    void zero_grad() { node_->grad = Tensor<T>(); }

    // Detached copy of the value; never participates in gradients.
    Var detach() const { return Var(node_->value, false); }

    // Reverse-mode sweep from a scalar root.
    void backward() const {
        if (numel() != 1) throw ShapeError("backward() requires a scalar root, got " + shape_str(shape()));
        std::vector<Node<T>*> order;
        std::unordered_set<Node<T>*> seen;
        std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
        seen.insert(node_.get());
        while (!stack.empty()) {
            auto& [n, i] = stack.back();
            if (i < n->parents.size()) {
                Node<T>* p = n->parents[i++].get();
                if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
            } else {
                order.push_back(n);
                stack.pop_back();
            }
        }
        node_->grad_buffer()[0] += T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node<T>* n = *it;
            if (n->backward_fn && n->grad.numel() == n->value.numel()) n->backward_fn(*n);
        }
    }

private:
    std::shared_ptr<Node<T>> node_;
};

}  // namespace rdshift

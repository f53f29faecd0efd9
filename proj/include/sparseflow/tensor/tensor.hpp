// Copyright 2026 The sparseflow authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cassert>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <vector>

#include "sparseflow/common.hpp"

namespace sparseflow {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t e : s) {
        if (e <= 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_str(s));
        n *= e;
    }
    return n;
}

template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> values;
    std::vector<T> grad;  // same length as values iff requires_grad
    bool requires_grad = false;
};

/// Dense row-major N-D tensor. A Tensor is a cheap shared handle onto its
/// storage node; copies alias. The canonical 5-D layout is
/// [batch, channel, depth, height, width].
template <typename T>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape) {
        Tensor t;
        t.node_ = std::make_shared<TensorNode<T>>();
        t.node_->values.assign(static_cast<size_t>(shape_numel(shape)), T(0));
        t.node_->shape = std::move(shape);
        return t;
    }

    static Tensor full(Shape shape, T v) {
        Tensor t = zeros(std::move(shape));
        std::fill(t.values().begin(), t.values().end(), v);
        return t;
    }

    static Tensor from(Shape shape, std::vector<T> values) {
        if (shape_numel(shape) != static_cast<int64_t>(values.size()))
            throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                        " does not match shape " + shape_str(shape));
        Tensor t;
        t.node_ = std::make_shared<TensorNode<T>>();
        t.node_->shape = std::move(shape);
        t.node_->values = std::move(values);
        return t;
    }

    static Tensor scalar(T v) { return from({1}, {v}); }

    bool defined() const { return node_ != nullptr; }

    const Shape& shape() const { return node_->shape; }
    int64_t dim(size_t i) const { return node_->shape.at(i); }
    size_t rank() const { return node_->shape.size(); }
    int64_t numel() const { return static_cast<int64_t>(node_->values.size()); }

    std::vector<T>& values() { return node_->values; }
    const std::vector<T>& values() const { return node_->values; }
    T* data() { return node_->values.data(); }
    const T* data() const { return node_->values.data(); }

    bool requires_grad() const { return node_->requires_grad; }

    Tensor& set_requires_grad(bool on) {
        node_->requires_grad = on;
        if (on)
            node_->grad.assign(node_->values.size(), T(0));
        else
            node_->grad.clear();
        return *this;
    }

    std::vector<T>& grad() {
        if (!node_->requires_grad) throw std::logic_error("tensor does not track gradients");
        return node_->grad;
    }
    const std::vector<T>& grad() const {
        if (!node_->requires_grad) throw std::logic_error("tensor does not track gradients");
        return node_->grad;
    }

    void zero_grad() {
        if (node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
    }

    T item() const {
        if (numel() != 1) throw std::invalid_argument("item() on non-scalar tensor of shape " + shape_str(shape()));
        return node_->values[0];
    }

    /// Deep copy of values (grad state not copied).
    Tensor clone() const {
        Tensor t = from(node_->shape, node_->values);
        return t;
    }

    /// Same storage, reinterpreted shape.
    Tensor reshaped(Shape shape) const {
        if (shape_numel(shape) != numel())
            throw std::invalid_argument("cannot reshape " + shape_str(this->shape()) + " to " + shape_str(shape));
        Tensor t;
        t.node_ = std::make_shared<TensorNode<T>>(*node_);
        t.node_->shape = std::move(shape);
        return t;
    }

    TensorNode<T>* node() const { return node_.get(); }
    std::shared_ptr<TensorNode<T>> node_ptr() const { return node_; }

    bool all_finite() const {
        for (T v : node_->values)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

private:
    std::shared_ptr<TensorNode<T>> node_;
};

/// Ordered record of executed operations. Every op executed under an active
/// TapeScope appends one backward closure; backward() replays the record in
/// reverse exactly once, accumulating gradients additively across fan-out.
template <typename T>
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(std::function<void()> backward_fn) { ops_.push_back(std::move(backward_fn)); }

    size_t num_ops() const { return ops_.size(); }

    void backward(const Tensor<T>& loss) {
        if (loss.numel() != 1)
            throw std::invalid_argument("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
        if (!loss.requires_grad())
            throw std::invalid_argument("backward: loss is not connected to this tape");
        if (consumed_) throw std::logic_error("tape already consumed by a previous backward pass");
        consumed_ = true;
        loss.node()->grad[0] += T(1);
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    }

private:
    std::vector<std::function<void()>> ops_;
    bool consumed_ = false;
};

/// RAII activation of a tape. Ops only record while a scope is live, so
/// frozen models can run forward concurrently with zero bookkeeping.
template <typename T>
class TapeScope {
public:
    explicit TapeScope(Tape<T>& tape) : prev_(active_) { active_ = &tape; }
    ~TapeScope() { active_ = prev_; }
    TapeScope(const TapeScope&) = delete;

    static Tape<T>* active() { return active_; }

private:
    Tape<T>* prev_;
    inline static thread_local Tape<T>* active_ = nullptr;
};

template <typename T>
void backward(const Tensor<T>& loss, Tape<T>& tape) {
    tape.backward(loss);
}

namespace detail {

template <typename T>
bool tracing(std::initializer_list<const Tensor<T>*> inputs) {
    if (!TapeScope<T>::active()) return false;
    for (const Tensor<T>* t : inputs)
        if (t->defined() && t->requires_grad()) return true;
    return false;
}

template <typename T>
void mark_output(Tensor<T>& out) {
    out.set_requires_grad(true);
}

}  // namespace detail

}  // namespace sparseflow

// SPDX-License-Identifier: Apache-2.0
//
// mdfce: dual-band massive MIMO channel extrapolation toolkit
//
// Minimal dense real-tensor type with reverse-mode automatic differentiation.
// Tensors are row-major flat buffers of 64-bit floats; shapes are metadata.
// Operations (see ops.hpp) append nodes to a Graph; Graph::backward walks the
// node list once in reverse append order, so topological order is implied by
// construction and the walk is acyclic by construction.

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mdfce/errors.hpp"
#include "mdfce/rng.hpp"

namespace mdfce {

using Shape = std::vector<int>;

inline size_t shape_numel(const Shape& shape) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad; // empty until backward (or an accumulation) touches it

    // Graph wiring; only populated while a recording Graph is active.
    std::vector<std::shared_ptr<TensorImpl>> parents;
    std::function<void(TensorImpl&)> backward_fn;

    std::vector<double>& ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
        return grad;
    }
};

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        auto impl = std::make_shared<TensorImpl>();
        impl->data.assign(shape_numel(shape), 0.0);
        impl->shape = std::move(shape);
        impl->requires_grad = requires_grad;
        return Tensor(std::move(impl));
    }

    static Tensor full(Shape shape, double value, bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        for (double& v : t.impl_->data) v = value;
        return t;
    }

    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false) {
        if (shape_numel(shape) != values.size())
            throw ShapeError("Tensor::from: shape " + shape_str(shape) + " does not match " +
                             std::to_string(values.size()) + " values");
        auto impl = std::make_shared<TensorImpl>();
        impl->shape = std::move(shape);
        impl->data = std::move(values);
        impl->requires_grad = requires_grad;
        return Tensor(std::move(impl));
    }

    static Tensor scalar(double value, bool requires_grad = false) {
        return from({1}, {value}, requires_grad);
    }

    static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0, bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        for (double& v : t.impl_->data) v = stddev * rng.normal();
        return t;
    }

    // Uniform(-bound, bound); the standard fan-in init for linear maps.
    static Tensor rand_uniform(Shape shape, Rng& rng, double bound, bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        for (double& v : t.impl_->data) v = rng.uniform(-bound, bound);
        return t;
    }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    size_t numel() const { return impl_->data.size(); }

    // Rank-1 tensors are treated as a single row where 2-D access is needed.
    int rows() const { return impl_->shape.size() >= 2 ? impl_->shape[0] : 1; }
    int cols() const {
        return impl_->shape.size() >= 2 ? impl_->shape[1]
                                        : (impl_->shape.empty() ? 1 : impl_->shape[0]);
    }

    double* data() { return impl_->data.data(); }
    const double* data() const { return impl_->data.data(); }
    std::vector<double>& values() { return impl_->data; }
    const std::vector<double>& values() const { return impl_->data; }

    double at(int r, int c) const { return impl_->data[static_cast<size_t>(r) * cols() + c]; }
    double& at(int r, int c) { return impl_->data[static_cast<size_t>(r) * cols() + c]; }
    double operator[](size_t i) const { return impl_->data[i]; }
    double& operator[](size_t i) { return impl_->data[i]; }

    double value() const {
        if (numel() != 1)
            throw ContractError("Tensor::value: tensor " + shape_str(shape()) + " is not scalar");
        return impl_->data[0];
    }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool v) { impl_->requires_grad = v; }

    bool has_grad() const { return !impl_->grad.empty(); }
    const std::vector<double>& grad() const {
        if (impl_->grad.empty())
            throw ContractError("Tensor::grad: no gradient populated");
        return impl_->grad;
    }
    std::vector<double>& ensure_grad() { return impl_->ensure_grad(); }
    void zero_grad() {
        if (!impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
    }
    void drop_grad() { impl_->grad.clear(); }

    bool all_finite() const {
        for (double v : impl_->data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    std::shared_ptr<TensorImpl>& impl() { return impl_; }
    const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

private:
    std::shared_ptr<TensorImpl> impl_;
};

// Append-only computation tape. One Graph per forward pass; independent
// graphs may run concurrently as long as they do not share parameter grads.
class Graph {
public:
    bool recording = true;

    void record(std::shared_ptr<TensorImpl> node) { nodes_.push_back(std::move(node)); }
    size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    // Populates grads of every requires_grad tensor reachable from `loss`.
    // Visits each recorded node exactly once, in reverse append order.
    // Gradients accumulate additively, both across fan-out within one graph
    // and across repeated backward calls (callers zero grads between steps).
    void backward(const Tensor& loss) {
        if (loss.numel() != 1)
            throw ContractError("backward: loss must be scalar, got " + shape_str(loss.shape()));
        loss.impl()->ensure_grad()[0] += 1.0;
        for (size_t i = nodes_.size(); i-- > 0;) {
            TensorImpl& node = *nodes_[i];
            if (!node.grad.empty() && node.backward_fn) node.backward_fn(node);
        }
    }

private:
    std::vector<std::shared_ptr<TensorImpl>> nodes_;
};

} // namespace mdfce

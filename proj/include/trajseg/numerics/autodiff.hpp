#pragma once

// Reverse-mode differentiation over dense Eigen matrices.
//
// A Tape records one forward evaluation. Every node owns its value and a
// lazily allocated gradient of identical shape; nodes whose inputs carry no
// gradient are recorded as constants and skipped during backward. Model
// weights live in a ParamStore and enter the tape by reference, so a forward
// pass never copies weights and gradients land in a caller-owned Gradients
// buffer (one per sample, reduced in a fixed order by the trainer).

#include <Eigen/Dense>

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "trajseg/errors.hpp"

namespace trajseg {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

template <typename S>
struct Parameter {
    std::string name;
    Mat<S> value;
    std::size_t index = 0;
};

/// Ordered, name-addressed weight storage. Insertion order is the
/// serialization order of checkpoints.
template <typename S>
class ParamStore {
public:
    ParamStore() = default;
    ParamStore(const ParamStore&) = delete;
    ParamStore& operator=(const ParamStore&) = delete;
    ParamStore(ParamStore&&) noexcept = default;
    ParamStore& operator=(ParamStore&&) noexcept = default;

    Parameter<S>& add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
        if (index_.count(name) != 0) {
            throw StateError("duplicate parameter name: " + name);
        }
        Parameter<S>& p = params_.emplace_back();
        p.name = name;
        p.value = Mat<S>::Zero(rows, cols);
        p.index = params_.size() - 1;
        index_.emplace(name, p.index);
        return p;
    }

    [[nodiscard]] Parameter<S>& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) {
            throw InputError("unknown parameter: " + name);
        }
        return params_[it->second];
    }
    [[nodiscard]] const Parameter<S>& at(const std::string& name) const {
        return const_cast<ParamStore*>(this)->at(name);
    }
    [[nodiscard]] bool contains(const std::string& name) const { return index_.count(name) != 0; }

    [[nodiscard]] std::size_t size() const { return params_.size(); }
    [[nodiscard]] Parameter<S>& operator[](std::size_t i) { return params_[i]; }
    [[nodiscard]] const Parameter<S>& operator[](std::size_t i) const { return params_[i]; }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    [[nodiscard]] std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
        return n;
    }

    /// Copies every value into a store of another scalar type, same names and order.
    template <typename T>
    [[nodiscard]] ParamStore<T> cast() const {
        ParamStore<T> out;
        for (const auto& p : params_) {
            out.add(p.name, p.value.rows(), p.value.cols()).value = p.value.template cast<T>();
        }
        return out;
    }

private:
    std::deque<Parameter<S>> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Per-parameter gradient accumulators aligned with a ParamStore. Entries
/// stay empty (size 0) until a backward pass touches them.
template <typename S>
struct Gradients {
    std::vector<Mat<S>> grads;

    Gradients() = default;
    explicit Gradients(std::size_t n) : grads(n) {}

    void add(std::size_t index, const Mat<S>& g) {
        if (index >= grads.size()) grads.resize(index + 1);
        if (grads[index].size() == 0) {
            grads[index] = g;
        } else {
            grads[index] += g;
        }
    }

    void accumulate(const Gradients& other) {
        for (std::size_t i = 0; i < other.grads.size(); ++i) {
            if (other.grads[i].size() != 0) add(i, other.grads[i]);
        }
    }

    [[nodiscard]] Mat<S> get(const ParamStore<S>& store, std::size_t index) const {
        if (index < grads.size() && grads[index].size() != 0) return grads[index];
        return Mat<S>::Zero(store[index].value.rows(), store[index].value.cols());
    }
};

template <typename S>
class Tape;

template <typename S>
struct Var {
    Tape<S>* tape = nullptr;
    int id = -1;

    [[nodiscard]] bool valid() const { return tape != nullptr && id >= 0; }
    [[nodiscard]] const Mat<S>& value() const { return tape->value(*this); }
    [[nodiscard]] Eigen::Index rows() const { return value().rows(); }
    [[nodiscard]] Eigen::Index cols() const { return value().cols(); }
};

template <typename S>
class Tape {
public:
    using Backward = std::function<void()>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var<S> constant(Mat<S> value) { return make_leaf(std::move(value), false, -1, nullptr); }

    /// Leaf that receives a gradient; used by gradient checks and tests.
    Var<S> variable(Mat<S> value) { return make_leaf(std::move(value), true, -1, nullptr); }

    Var<S> param(const Parameter<S>& p) {
        return make_leaf(Mat<S>(), true, static_cast<int>(p.index), &p.value);
    }

    /// A parameter that should not receive gradient in this pass (frozen).
    Var<S> frozen(const Parameter<S>& p) { return make_leaf(Mat<S>(), false, -1, &p.value); }

    [[nodiscard]] const Mat<S>& value(Var<S> v) const {
        const Node& n = nodes_[static_cast<std::size_t>(v.id)];
        return n.external != nullptr ? *n.external : n.value;
    }

    [[nodiscard]] bool requires_grad(Var<S> v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }

    /// Gradient of the last backward root w.r.t. v (zeros when untouched).
    [[nodiscard]] Mat<S> grad(Var<S> v) const {
        const Node& n = nodes_[static_cast<std::size_t>(v.id)];
        if (n.grad.size() != 0) return n.grad;
        const Mat<S>& val = value(v);
        return Mat<S>::Zero(val.rows(), val.cols());
    }

    [[nodiscard]] const Mat<S>& upstream(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

    template <typename Derived>
    void accumulate(Var<S> v, const Eigen::MatrixBase<Derived>& g) {
        Node& n = nodes_[static_cast<std::size_t>(v.id)];
        if (!n.requires_grad) return;
        if (n.grad.size() == 0) {
            n.grad = g;
        } else {
            n.grad += g;
        }
    }

    /// Records an operation result. The backward closure runs only when at
    /// least one parent carries a gradient.
    Var<S> record(Mat<S> value, std::initializer_list<Var<S>> parents, Backward backward) {
        bool needs = false;
        for (const auto& p : parents) needs = needs || requires_grad(p);
        return record_node(std::move(value), needs, std::move(backward));
    }

    Var<S> record(Mat<S> value, const std::vector<Var<S>>& parents, Backward backward) {
        bool needs = false;
        for (const auto& p : parents) needs = needs || requires_grad(p);
        return record_node(std::move(value), needs, std::move(backward));
    }

    /// Seeds d(root)/d(root) = 1 for a 1x1 root and propagates to every
    /// recorded node; parameter gradients are added into `param_grads`.
    void backward(Var<S> root, Gradients<S>* param_grads = nullptr) {
        if (root.rows() != 1 || root.cols() != 1) {
            throw ShapeError("backward root must be 1x1");
        }
        for (auto& n : nodes_) n.grad.resize(0, 0);
        Node& r = nodes_[static_cast<std::size_t>(root.id)];
        if (!r.requires_grad) return;
        r.grad = Mat<S>::Ones(1, 1);
        for (int i = root.id; i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (!n.requires_grad || n.grad.size() == 0) continue;
            if (n.backward) n.backward();
            if (n.param_index >= 0 && param_grads != nullptr) {
                param_grads->add(static_cast<std::size_t>(n.param_index), n.grad);
            }
        }
    }

    [[nodiscard]] std::size_t size() const { return nodes_.size(); }

    /// Id the next recorded node will receive; ops capture it for backward.
    [[nodiscard]] int next_id() const { return static_cast<int>(nodes_.size()); }

private:
    struct Node {
        Mat<S> value;
        const Mat<S>* external = nullptr;
        Mat<S> grad;
        Backward backward;
        int param_index = -1;
        bool requires_grad = false;
    };

    Var<S> make_leaf(Mat<S> value, bool needs_grad, int param_index, const Mat<S>* external) {
        Node& n = nodes_.emplace_back();
        n.value = std::move(value);
        n.external = external;
        n.requires_grad = needs_grad;
        n.param_index = param_index;
        return Var<S>{this, static_cast<int>(nodes_.size() - 1)};
    }

    Var<S> record_node(Mat<S> value, bool needs, Backward backward) {
        Node& n = nodes_.emplace_back();
        n.value = std::move(value);
        n.requires_grad = needs;
        if (needs) n.backward = std::move(backward);
        return Var<S>{this, static_cast<int>(nodes_.size() - 1)};
    }

    std::deque<Node> nodes_;
};

}  // namespace trajseg

#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "trajseg/numerics/kernels.hpp"

namespace trajseg {

/// Binds a ParamStore to a Tape for one forward pass; each parameter enters
/// the tape once no matter how often it is read.
template <typename S>
class Graph {
public:
    Graph(Tape<S>& tape, const ParamStore<S>& params) : tape_(tape), params_(params), cache_(params.size(), -1) {}

    [[nodiscard]] Tape<S>& tape() { return tape_; }
    [[nodiscard]] const ParamStore<S>& params() const { return params_; }

    Var<S> param(std::size_t index) {
        int& slot = cache_.at(index);
        if (slot < 0) slot = tape_.param(params_[index]).id;
        return Var<S>{&tape_, slot};
    }

    Var<S> constant(Mat<S> m) { return tape_.constant(std::move(m)); }

private:
    Tape<S>& tape_;
    const ParamStore<S>& params_;
    std::vector<int> cache_;
};

/// Registers parameters under a common prefix and initializes them from one
/// seeded stream.
template <typename S>
class ParamInit {
public:
    ParamInit(ParamStore<S>& store, std::mt19937_64& rng, std::string prefix)
        : store_(store), rng_(rng), prefix_(std::move(prefix)) {}

    ParamInit scope(const std::string& name) const { return ParamInit(store_, rng_, prefix_ + name + "."); }

    /// Normal(0, gain / sqrt(fan_in)), fan_in = rows.
    std::size_t weight(const std::string& name, Eigen::Index rows, Eigen::Index cols, double gain = 1.0) {
        Parameter<S>& p = store_.add(prefix_ + name, rows, cols);
        std::normal_distribution<double> nd(0.0, gain / std::sqrt(static_cast<double>(rows)));
        for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value(i) = static_cast<S>(nd(rng_));
        return p.index;
    }

    std::size_t normal(const std::string& name, Eigen::Index rows, Eigen::Index cols, double stddev) {
        Parameter<S>& p = store_.add(prefix_ + name, rows, cols);
        std::normal_distribution<double> nd(0.0, stddev);
        for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value(i) = static_cast<S>(nd(rng_));
        return p.index;
    }

    std::size_t constant(const std::string& name, Eigen::Index rows, Eigen::Index cols, double value) {
        Parameter<S>& p = store_.add(prefix_ + name, rows, cols);
        p.value.setConstant(static_cast<S>(value));
        return p.index;
    }

private:
    ParamStore<S>& store_;
    std::mt19937_64& rng_;
    std::string prefix_;
};

struct Linear {
    std::size_t weight = 0;
    std::size_t bias = 0;
    bool has_bias = true;

    template <typename S>
    static Linear create(ParamInit<S>& init, const std::string& name, Eigen::Index in, Eigen::Index out,
                         bool bias = true, double gain = 1.0) {
        Linear l;
        l.weight = init.weight(name + ".w", in, out, gain);
        l.has_bias = bias;
        if (bias) l.bias = init.constant(name + ".b", 1, out, 0.0);
        return l;
    }

    template <typename S>
    Var<S> operator()(Graph<S>& g, Var<S> x) const {
        Var<S> y = ops::matmul(x, g.param(weight));
        return has_bias ? ops::add_row(y, g.param(bias)) : y;
    }
};

struct LayerNorm {
    std::size_t gain = 0;
    std::size_t bias = 0;

    template <typename S>
    static LayerNorm create(ParamInit<S>& init, const std::string& name, Eigen::Index width) {
        return LayerNorm{init.constant(name + ".g", 1, width, 1.0), init.constant(name + ".b", 1, width, 0.0)};
    }

    template <typename S>
    Var<S> operator()(Graph<S>& g, Var<S> x) const {
        return ops::layer_norm_rows(x, g.param(gain), g.param(bias));
    }
};

/// Single-head cross-attention with input and output projections:
/// out = softmax((q Wq)(kv Wk)^T / sqrt(d)) (kv Wv) Wo.
struct Attention {
    Linear q, k, v, o;

    template <typename S>
    static Attention create(ParamInit<S>& init, const std::string& name, Eigen::Index width, Eigen::Index dim) {
        auto s = init.scope(name);
        return Attention{Linear::create(s, "q", width, dim, false), Linear::create(s, "k", width, dim, false),
                         Linear::create(s, "v", width, dim, false), Linear::create(s, "o", dim, width, false)};
    }

    /// `query_pos` / `key_pos` are added to queries and keys only (not values).
    template <typename S>
    Var<S> operator()(Graph<S>& g, Var<S> queries, Var<S> keys, const Var<S>* query_pos = nullptr,
                      const Var<S>* key_pos = nullptr) const {
        Var<S> qin = query_pos != nullptr ? ops::add(queries, *query_pos) : queries;
        Var<S> kin = key_pos != nullptr ? ops::add(keys, *key_pos) : keys;
        return o(g, scaled_dot_attention(q(g, qin), k(g, kin), v(g, keys)));
    }
};

}  // namespace trajseg

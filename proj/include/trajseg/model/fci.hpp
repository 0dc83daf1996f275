#pragma once

#include <span>
#include <vector>

#include "trajseg/model/layers.hpp"
#include "trajseg/io/config.hpp"

namespace trajseg {

/// One FCI application for a single frame:
/// x + softmax(x Wq (f Wk)^T / sqrt(d)) (f Wv) Wo.
template <typename S>
Var<S> fci_frame(Var<S> x_traj, Var<S> frame, Var<S> wq, Var<S> wk, Var<S> wv, Var<S> wo) {
    const Eigen::Index c = x_traj.cols();
    if (x_traj.rows() != 1) throw ShapeError("fci: target token must be a single row");
    if (frame.cols() != c) throw ShapeError("fci: frame features width differs from the target token");
    if (wq.rows() != c || wk.rows() != c || wv.rows() != c) throw ShapeError("fci: projection input width mismatch");
    if (wq.cols() != wk.cols() || wk.cols() != wv.cols()) throw ShapeError("fci: W_Q, W_K, W_V disagree on d");
    if (wo.rows() != wv.cols() || wo.cols() != c) throw ShapeError("fci: output map must be d x C");
    Var<S> attn = scaled_dot_attention(ops::matmul(x_traj, wq), ops::matmul(frame, wk), ops::matmul(frame, wv));
    return ops::add(x_traj, ops::matmul(attn, wo));
}

/// Expands the trajectory token into one frame token per key frame.
class FrameContentIntegration {
public:
    FrameContentIntegration() = default;

    template <typename S>
    FrameContentIntegration(ParamInit<S> init, const RunConfig& cfg) {
        wq_ = init.weight("wq", cfg.channels, cfg.attn_dim);
        wk_ = init.weight("wk", cfg.channels, cfg.attn_dim);
        wv_ = init.weight("wv", cfg.channels, cfg.attn_dim);
        wo_ = init.weight("wo", cfg.attn_dim, cfg.channels, 0.5);
    }

    [[nodiscard]] std::size_t wq() const { return wq_; }
    [[nodiscard]] std::size_t wk() const { return wk_; }
    [[nodiscard]] std::size_t wv() const { return wv_; }
    [[nodiscard]] std::size_t wo() const { return wo_; }

    template <typename S>
    Var<S> expand_one(Graph<S>& g, Var<S> x_traj, Var<S> frame) const {
        return fci_frame(x_traj, frame, g.param(wq_), g.param(wk_), g.param(wv_), g.param(wo_));
    }

    template <typename S>
    std::vector<Var<S>> expand(Graph<S>& g, Var<S> x_traj, std::span<const Var<S>> key_frames) const {
        std::vector<Var<S>> out;
        out.reserve(key_frames.size());
        for (const Var<S>& f : key_frames) out.push_back(expand_one(g, x_traj, f));
        return out;
    }

private:
    std::size_t wq_ = 0, wk_ = 0, wv_ = 0, wo_ = 0;
};

}  // namespace trajseg

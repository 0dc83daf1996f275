#pragma once

// Named numeric kernels of the pipeline: attention, ROI-align, bilinear
// resampling and the two mask losses.

#include <algorithm>
#include <cmath>
#include <string>

#include "trajseg/numerics/ops.hpp"

namespace trajseg {

/// Smoothing added to numerator and denominator of the Dice ratio, in pixel-count units.
inline constexpr double kDiceSmoothing = 1.0;
/// Probabilities are clamped to [delta, 1 - delta] before the logarithm.
inline constexpr double kBceClamp = 1e-7;

/// Normalized rectangle [x0, y0, x1, y1] in [0, 1] image coordinates.
struct Box {
    double x0 = 0;
    double y0 = 0;
    double x1 = 1;
    double y1 = 1;

    [[nodiscard]] bool operator==(const Box&) const = default;
};

/// softmax(q k^T / sqrt(d)) v, rows of q attending over rows of k.
template <typename S>
Var<S> scaled_dot_attention(Var<S> q, Var<S> k, Var<S> v) {
    if (q.cols() < 1) throw ShapeError("scaled_dot_attention: d must be >= 1");
    if (k.rows() < 1) throw ShapeError("scaled_dot_attention: need at least one key");
    if (q.cols() != k.cols()) {
        throw ShapeError("scaled_dot_attention: q/k width mismatch " + std::to_string(q.cols()) + " vs " +
                         std::to_string(k.cols()));
    }
    if (k.rows() != v.rows()) {
        throw ShapeError("scaled_dot_attention: k/v row mismatch " + std::to_string(k.rows()) + " vs " +
                         std::to_string(v.rows()));
    }
    const S inv = S(1) / std::sqrt(static_cast<S>(q.cols()));
    return ops::matmul(ops::softmax_rows(ops::scale(ops::matmul_nt(q, k), inv)), v);
}

/// Same as scaled_dot_attention with an additive score mask (e.g. -inf above
/// the diagonal for causal attention).
template <typename S>
Var<S> masked_attention(Var<S> q, Var<S> k, Var<S> v, const Mat<S>& score_mask) {
    if (q.cols() != k.cols() || k.rows() != v.rows()) throw ShapeError("masked_attention: shape mismatch");
    const S inv = S(1) / std::sqrt(static_cast<S>(q.cols()));
    return ops::matmul(ops::softmax_rows(ops::add_const(ops::scale(ops::matmul_nt(q, k), inv), score_mask)), v);
}

/// Sampling matrix of ROI-align over an h x w grid stored row-major as
/// (h*w) x C: row (i*out + j) holds the bilinear weights of output bin (i, j).
/// One sample per bin at the bin center; continuous coordinates use the
/// half-pixel convention, so cell (r, c) has its center at (c + 0.5, r + 0.5).
template <typename S>
Mat<S> roi_align_weights(Eigen::Index h, Eigen::Index w, const Box& box, Eigen::Index out) {
    if (!(box.x0 < box.x1) || !(box.y0 < box.y1)) {
        throw InputError("roi_align: degenerate box [" + std::to_string(box.x0) + "," + std::to_string(box.y0) +
                         "," + std::to_string(box.x1) + "," + std::to_string(box.y1) + "]");
    }
    if (out < 1 || h < 1 || w < 1) throw ShapeError("roi_align: empty grid or output");
    Mat<S> m = Mat<S>::Zero(out * out, h * w);
    const double bw = (box.x1 - box.x0) * static_cast<double>(w) / static_cast<double>(out);
    const double bh = (box.y1 - box.y0) * static_cast<double>(h) / static_cast<double>(out);
    for (Eigen::Index i = 0; i < out; ++i) {
        double y = box.y0 * static_cast<double>(h) + (static_cast<double>(i) + 0.5) * bh - 0.5;
        y = std::clamp(y, 0.0, static_cast<double>(h - 1));
        const auto y0 = static_cast<Eigen::Index>(std::floor(y));
        const Eigen::Index y1 = std::min(y0 + 1, h - 1);
        const double ly = y - static_cast<double>(y0);
        for (Eigen::Index j = 0; j < out; ++j) {
            double x = box.x0 * static_cast<double>(w) + (static_cast<double>(j) + 0.5) * bw - 0.5;
            x = std::clamp(x, 0.0, static_cast<double>(w - 1));
            const auto x0 = static_cast<Eigen::Index>(std::floor(x));
            const Eigen::Index x1 = std::min(x0 + 1, w - 1);
            const double lx = x - static_cast<double>(x0);
            const Eigen::Index r = i * out + j;
            m(r, y0 * w + x0) += static_cast<S>((1 - ly) * (1 - lx));
            m(r, y0 * w + x1) += static_cast<S>((1 - ly) * lx);
            m(r, y1 * w + x0) += static_cast<S>(ly * (1 - lx));
            m(r, y1 * w + x1) += static_cast<S>(ly * lx);
        }
    }
    return m;
}

/// ROI-align of a feature map given as (h*w) x C; returns (out*out) x C.
template <typename S>
Var<S> roi_align(Var<S> feature, Eigen::Index h, Eigen::Index w, const Box& box, Eigen::Index out) {
    if (feature.rows() != h * w) throw ShapeError("roi_align: feature rows != h*w");
    return ops::left_apply(roi_align_weights<S>(h, w, box, out), feature);
}

/// 1-D bilinear upsampling operator (out x in) by an integer factor, half-pixel
/// centers with edge clamping. Applied separably: U_rows * X * U_cols^T.
template <typename S>
Mat<S> bilinear_upsample_matrix(Eigen::Index in, Eigen::Index factor) {
    const Eigen::Index out = in * factor;
    Mat<S> u = Mat<S>::Zero(out, in);
    for (Eigen::Index o = 0; o < out; ++o) {
        double x = (static_cast<double>(o) + 0.5) / static_cast<double>(factor) - 0.5;
        x = std::clamp(x, 0.0, static_cast<double>(in - 1));
        const auto x0 = static_cast<Eigen::Index>(std::floor(x));
        const Eigen::Index x1 = std::min(x0 + 1, in - 1);
        const double l = x - static_cast<double>(x0);
        u(o, x0) += static_cast<S>(1 - l);
        u(o, x1) += static_cast<S>(l);
    }
    return u;
}

/// Block-average operator (in/factor x in), the adjoint-style companion used
/// to bring full-resolution masks down to the patch grid.
template <typename S>
Mat<S> average_pool_matrix(Eigen::Index in, Eigen::Index factor) {
    if (in % factor != 0) throw ShapeError("average_pool_matrix: size not divisible by factor");
    const Eigen::Index out = in / factor;
    Mat<S> d = Mat<S>::Zero(out, in);
    for (Eigen::Index o = 0; o < out; ++o) {
        d.block(o, o * factor, 1, factor).setConstant(S(1) / static_cast<S>(factor));
    }
    return d;
}

/// Upsamples an h x w map by `factor` in both directions.
template <typename S>
Var<S> bilinear_upsample(Var<S> x, Eigen::Index factor) {
    const Mat<S> ur = bilinear_upsample_matrix<S>(x.rows(), factor);
    const Mat<S> uc = bilinear_upsample_matrix<S>(x.cols(), factor);
    return ops::transpose(ops::left_apply(uc, ops::transpose(ops::left_apply(ur, x))));
}

/// 1 - (2 sum(p g) + eps) / (sum(p) + sum(g) + eps) over all entries.
template <typename S>
Var<S> dice_loss(Var<S> pred, const Mat<S>& gt, S eps = static_cast<S>(kDiceSmoothing)) {
    if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
        throw ShapeError("dice_loss: shape mismatch");
    }
    const S num = S(2) * pred.value().cwiseProduct(gt).sum() + eps;
    const S den = pred.value().sum() + gt.sum() + eps;
    Tape<S>* t = pred.tape;
    const int out = t->next_id();
    return t->record(Mat<S>::Constant(1, 1, S(1) - num / den), {pred}, [t, pred, gt, num, den, out] {
        const S g = t->upstream(out)(0, 0);
        // d/dp_i of -num/den = -(2 g_i den - num) / den^2
        Mat<S> gp = ((S(2) * den) * gt.array() - num).matrix() * (-g / (den * den));
        t->accumulate(pred, gp);
    });
}

/// Mean per-entry binary cross-entropy on probabilities, clamped to [delta, 1 - delta].
template <typename S>
Var<S> bce_loss(Var<S> pred, const Mat<S>& gt, S delta = static_cast<S>(kBceClamp)) {
    if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
        throw ShapeError("bce_loss: shape mismatch");
    }
    const Mat<S> p = pred.value().cwiseMax(delta).cwiseMin(S(1) - delta);
    const S n = static_cast<S>(p.size());
    const S value =
        -(gt.array() * p.array().log() + (S(1) - gt.array()) * (S(1) - p.array()).log()).sum() / n;
    Tape<S>* t = pred.tape;
    const int out = t->next_id();
    return t->record(Mat<S>::Constant(1, 1, value), {pred}, [t, pred, gt, p, n, delta, out] {
        const S g = t->upstream(out)(0, 0) / n;
        const auto& raw = pred.value();
        Mat<S> gp(p.rows(), p.cols());
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            const bool inside = raw(i) >= delta && raw(i) <= S(1) - delta;
            gp(i) = inside ? g * (-gt(i) / p(i) + (S(1) - gt(i)) / (S(1) - p(i))) : S(0);
        }
        t->accumulate(pred, gp);
    });
}

}  // namespace trajseg

#pragma once

// Differentiable matrix operations on Tape variables. Every op checks its
// shapes eagerly and throws ShapeError; backward closures capture only ids.

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "trajseg/numerics/autodiff.hpp"

namespace trajseg::ops {

namespace detail {

inline std::string dims(Eigen::Index r, Eigen::Index c) {
    return std::to_string(r) + "x" + std::to_string(c);
}

template <typename S>
void require_same_shape(Var<S> a, Var<S> b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + dims(a.rows(), a.cols()) + " vs " +
                         dims(b.rows(), b.cols()));
    }
}

}  // namespace detail

template <typename S>
Var<S> matmul(Var<S> a, Var<S> b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimension mismatch " + detail::dims(a.rows(), a.cols()) + " * " +
                         detail::dims(b.rows(), b.cols()));
    }
    Tape<S>* t = a.tape;
    const int out = t->next_id();
    return t->record(a.value() * b.value(), {a, b}, [t, a, b, out] {
        const Mat<S>& g = t->upstream(out);
        if (t->requires_grad(a)) t->accumulate(a, g * b.value().transpose());
        if (t->requires_grad(b)) t->accumulate(b, a.value().transpose() * g);
    });
}

/// a * b^T
template <typename S>
Var<S> matmul_nt(Var<S> a, Var<S> b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_nt: inner dimension mismatch " + detail::dims(a.rows(), a.cols()) + " * (" +
                         detail::dims(b.rows(), b.cols()) + ")^T");
    }
    Tape<S>* t = a.tape;
    const int out = t->next_id();
    return t->record(a.value() * b.value().transpose(), {a, b}, [t, a, b, out] {
        const Mat<S>& g = t->upstream(out);
        if (t->requires_grad(a)) t->accumulate(a, g * b.value());
        if (t->requires_grad(b)) t->accumulate(b, g.transpose() * a.value());
    });
}

/// m * a for a constant matrix m.
template <typename S>
Var<S> left_apply(const Mat<S>& m, Var<S> a) {
    if (m.cols() != a.rows()) throw ShapeError("left_apply: dimension mismatch");
    Tape<S>* t = a.tape;
    const int out = t->next_id();
    return t->record(m * a.value(), {a}, [t, m, a, out] { t->accumulate(a, m.transpose() * t->upstream(out)); });
}

template <typename S>
Var<S> transpose(Var<S> a) {
    Tape<S>* t = a.tape;
    const int out = t->next_id();
    return t->record(a.value().transpose(), {a},
                     [t, a, out] { t->accumulate(a, t->upstream(out).transpose()); });
}

template <typename S>
Var<S> add(Var<S> a, Var<S> b) {
    detail::require_same_shape(a, b, "add");
    Tape<S>* t = a.tape;
    const int out = t->next_id();
    return t->record(a.value() + b.value(), {a, b}, [t, a, b, out] {
        t->accumulate(a, t->upstream(out));
        t->accumulate(b, t->upstream(out));
    });
}

template <typename S>
Var<S> sub(Var<S> a, Var<S> b) {
    detail::require_same_shape(a, b, "sub");
    Tape<S>* t = a.tape;
    const int out = t->next_id();
    return t->record(a.value() - b.value(), {a, b}, [t, a, b, out] {
        t->accumulate(a, t->upstream(out));
        t->accumulate(b, -t->upstream(out));
    });
}

template <typename S>
Var<S> hadamard(Var<S> a, Var<S> b) {
    detail::require_same_shape(a, b, "hadamard");
    Tape<S>* t = a.tape;
    const int out = t->next_id();
    return t->record(a.value().cwiseProduct(b.value()), {a, b}, [t, a, b, out] {
        const Mat<S>& g = t->upstream(out);
        t->accumulate(a, g.cwiseProduct(b.value()));
        t->accumulate(b, g.cwiseProduct(a.value()));
    });
}

template <typename S>
Var<S> scale(Var<S> a, S s) {
    Tape<S>* t = a.tape;
    const int out = t->next_id();
    return t->record(a.value() * s, {a}, [t, a, s, out] { t->accumulate(a, t->upstream(out) * s); });
}

/// a (n x c) scaled by a 1x1 variable.
template <typename S>
Var<S> scale_by(Var<S> a, Var<S> s) {
    if (s.rows() != 1 || s.cols() != 1) throw ShapeError("scale_by: scale must be 1x1");
    Tape<S>* t = a.tape;
    const int out = t->next_id();
    return t->record(a.value() * s.value()(0, 0), {a, s}, [t, a, s, out] {
        const Mat<S>& g = t->upstream(out);
        t->accumulate(a, g * s.value()(0, 0));
        if (t->requires_grad(s)) t->accumulate(s, Mat<S>::Constant(1, 1, g.cwiseProduct(a.value()).sum()));
    });
}

/// Adds a constant matrix (masks, fixed offsets).
template <typename S>
Var<S> add_const(Var<S> a, const Mat<S>& c) {
    if (a.rows() != c.rows() || a.cols() != c.cols()) throw ShapeError("add_const: shape mismatch");
    Tape<S>* t = a.tape;
    const int out = t->next_id();
    return t->record(a.value() + c, {a}, [t, a, out] { t->accumulate(a, t->upstream(out)); });
}

/// Broadcast-adds a 1 x c row to every row of a.
template <typename S>
Var<S> add_row(Var<S> a, Var<S> row) {
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw ShapeError("add_row: expected 1x" + std::to_string(a.cols()) + " row, got " +
                         detail::dims(row.rows(), row.cols()));
    }
    Tape<S>* t = a.tape;
    const int out = t->next_id();
    Mat<S> v = a.value().rowwise() + row.value().row(0);
    return t->record(std::move(v), {a, row}, [t, a, row, out] {
        const Mat<S>& g = t->upstream(out);
        t->accumulate(a, g);
        if (t->requires_grad(row)) t->accumulate(row, g.colwise().sum());
    });
}

/// Repeats a 1 x c row n times.
template <typename S>
Var<S> broadcast_rows(Var<S> row, Eigen::Index n) {
    if (row.rows() != 1) throw ShapeError("broadcast_rows: expected a single row");
    Tape<S>* t = row.tape;
    const int out = t->next_id();
    return t->record(row.value().replicate(n, 1), {row},
                     [t, row, out] { t->accumulate(row, t->upstream(out).colwise().sum()); });
}

template <typename S>
Var<S> sum(Var<S> a) {
    Tape<S>* t = a.tape;
    const int out = t->next_id();
    return t->record(Mat<S>::Constant(1, 1, a.value().sum()), {a}, [t, a, out] {
        t->accumulate(a, Mat<S>::Constant(a.rows(), a.cols(), t->upstream(out)(0, 0)));
    });
}

template <typename S>
Var<S> mean(Var<S> a) {
    const S n = static_cast<S>(a.value().size());
    return scale(sum(a), S(1) / n);
}

/// Column-wise mean over rows: n x c -> 1 x c.
template <typename S>
Var<S> mean_rows(Var<S> a) {
    Tape<S>* t = a.tape;
    const int out = t->next_id();
    const S n = static_cast<S>(a.rows());
    return t->record(a.value().colwise().mean(), {a}, [t, a, n, out] {
        t->accumulate(a, t->upstream(out).replicate(a.rows(), 1) / n);
    });
}

template <typename S>
Var<S> softmax_rows(Var<S> a) {
    Mat<S> y = a.value();
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const S mx = y.row(r).maxCoeff();
        y.row(r) = (y.row(r).array() - mx).exp();
        y.row(r) /= y.row(r).sum();
    }
    Tape<S>* t = a.tape;
    const int out = t->next_id();
    return t->record(std::move(y), {a}, [t, a, out] {
        const Mat<S>& g = t->upstream(out);
        const Mat<S>& y = t->value(Var<S>{t, out});
        Vec<S> dot = g.cwiseProduct(y).rowwise().sum();
        Mat<S> ga = y.cwiseProduct(g - dot.replicate(1, g.cols()));
        t->accumulate(a, ga);
    });
}

template <typename S>
Var<S> sigmoid(Var<S> a) {
    Mat<S> y = (S(1) + (-a.value().array()).exp()).inverse().matrix();
    Tape<S>* t = a.tape;
    const int out = t->next_id();
    return t->record(std::move(y), {a}, [t, a, out] {
        const Mat<S>& y = t->value(Var<S>{t, out});
        t->accumulate(a, t->upstream(out).cwiseProduct(y.cwiseProduct((S(1) - y.array()).matrix())));
    });
}

template <typename S>
Var<S> tanh(Var<S> a) {
    Mat<S> y = a.value().array().tanh().matrix();
    Tape<S>* t = a.tape;
    const int out = t->next_id();
    return t->record(std::move(y), {a}, [t, a, out] {
        const Mat<S>& y = t->value(Var<S>{t, out});
        t->accumulate(a, t->upstream(out).cwiseProduct((S(1) - y.array().square()).matrix()));
    });
}

/// GELU, tanh approximation. Smooth everywhere, which keeps finite-difference
/// checks free of kinks.
template <typename S>
Var<S> gelu(Var<S> a) {
    const S c = static_cast<S>(0.7978845608028654);  // sqrt(2/pi)
    const S k = static_cast<S>(0.044715);
    // Vectorized array functions: scalar libm tanh calls are much slower here.
    const auto x = a.value().array();
    Mat<S> y = (S(0.5) * x * (S(1) + (c * (x + k * x.cube())).tanh())).matrix();
    Tape<S>* t = a.tape;
    const int out = t->next_id();
    return t->record(std::move(y), {a}, [t, a, c, k, out] {
        const auto x = a.value().array();
        const Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic> th = (c * (x + k * x.cube())).tanh();
        Mat<S> d = (S(0.5) * (S(1) + th) + S(0.5) * x * (S(1) - th.square()) * c * (S(1) + S(3) * k * x.square())).matrix();
        t->accumulate(a, t->upstream(out).cwiseProduct(d));
    });
}

/// Row-wise layer normalization with learned gain and bias (both 1 x c).
template <typename S>
Var<S> layer_norm_rows(Var<S> a, Var<S> gain, Var<S> bias, S eps = S(1e-5)) {
    const Eigen::Index c = a.cols();
    if (gain.rows() != 1 || gain.cols() != c || bias.rows() != 1 || bias.cols() != c) {
        throw ShapeError("layer_norm_rows: gain/bias must be 1x" + std::to_string(c));
    }
    Mat<S> xhat(a.rows(), c);
    Vec<S> inv_std(a.rows());
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const S mu = a.value().row(r).mean();
        const S var = (a.value().row(r).array() - mu).square().mean();
        inv_std(r) = S(1) / std::sqrt(var + eps);
        xhat.row(r) = (a.value().row(r).array() - mu) * inv_std(r);
    }
    Mat<S> y = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() + bias.value().row(0).array();
    Tape<S>* t = a.tape;
    const int out = t->next_id();
    return t->record(std::move(y), {a, gain, bias}, [t, a, gain, bias, xhat, inv_std, out] {
        const Mat<S>& g = t->upstream(out);
        if (t->requires_grad(gain)) t->accumulate(gain, g.cwiseProduct(xhat).colwise().sum());
        if (t->requires_grad(bias)) t->accumulate(bias, g.colwise().sum());
        if (t->requires_grad(a)) {
            const S n = static_cast<S>(xhat.cols());
            Mat<S> gx = g.array().rowwise() * gain.value().row(0).array();
            Mat<S> ga(gx.rows(), gx.cols());
            for (Eigen::Index r = 0; r < gx.rows(); ++r) {
                const S m1 = gx.row(r).mean();
                const S m2 = gx.row(r).cwiseProduct(xhat.row(r)).sum() / n;
                ga.row(r) = (gx.row(r).array() - m1 - xhat.row(r).array() * m2) * inv_std(r);
            }
            t->accumulate(a, ga);
        }
    });
}

template <typename S>
Var<S> concat_rows(std::span<const Var<S>> parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    const Eigen::Index c = parts.front().cols();
    Eigen::Index n = 0;
    for (const auto& p : parts) {
        if (p.cols() != c) throw ShapeError("concat_rows: column mismatch");
        n += p.rows();
    }
    Mat<S> v(n, c);
    Eigen::Index r = 0;
    for (const auto& p : parts) {
        v.middleRows(r, p.rows()) = p.value();
        r += p.rows();
    }
    Tape<S>* t = parts.front().tape;
    const int out = t->next_id();
    std::vector<Var<S>> ps(parts.begin(), parts.end());
    return t->record(std::move(v), ps, [t, ps, out] {
        const Mat<S>& g = t->upstream(out);
        Eigen::Index r = 0;
        for (const auto& p : ps) {
            const Eigen::Index pr = p.rows();
            t->accumulate(p, g.middleRows(r, pr));
            r += pr;
        }
    });
}

template <typename S>
Var<S> concat_rows(std::initializer_list<Var<S>> parts) {
    std::vector<Var<S>> v(parts);
    return concat_rows(std::span<const Var<S>>(v));
}

template <typename S>
Var<S> concat_cols(std::span<const Var<S>> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const Eigen::Index r = parts.front().rows();
    Eigen::Index n = 0;
    for (const auto& p : parts) {
        if (p.rows() != r) throw ShapeError("concat_cols: row mismatch");
        n += p.cols();
    }
    Mat<S> v(r, n);
    Eigen::Index c = 0;
    for (const auto& p : parts) {
        v.middleCols(c, p.cols()) = p.value();
        c += p.cols();
    }
    Tape<S>* t = parts.front().tape;
    const int out = t->next_id();
    std::vector<Var<S>> ps(parts.begin(), parts.end());
    return t->record(std::move(v), ps, [t, ps, out] {
        const Mat<S>& g = t->upstream(out);
        Eigen::Index c = 0;
        for (const auto& p : ps) {
            const Eigen::Index pc = p.cols();
            t->accumulate(p, g.middleCols(c, pc));
            c += pc;
        }
    });
}

template <typename S>
Var<S> slice_rows(Var<S> a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.rows()) throw ShapeError("slice_rows: out of range");
    Tape<S>* t = a.tape;
    const int out = t->next_id();
    return t->record(a.value().middleRows(start, count), {a}, [t, a, start, count, out] {
        Mat<S> ga = Mat<S>::Zero(a.rows(), a.cols());
        ga.middleRows(start, count) = t->upstream(out);
        t->accumulate(a, ga);
    });
}

template <typename S>
Var<S> slice_cols(Var<S> a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.cols()) throw ShapeError("slice_cols: out of range");
    Tape<S>* t = a.tape;
    const int out = t->next_id();
    return t->record(a.value().middleCols(start, count), {a}, [t, a, start, count, out] {
        Mat<S> ga = Mat<S>::Zero(a.rows(), a.cols());
        ga.middleCols(start, count) = t->upstream(out);
        t->accumulate(a, ga);
    });
}

/// Reinterprets the row-major element order of a as rows x cols.
template <typename S>
Var<S> reshape(Var<S> a, Eigen::Index rows, Eigen::Index cols) {
    if (rows * cols != a.value().size()) throw ShapeError("reshape: element count mismatch");
    using RowMajor = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    RowMajor src = a.value();
    Mat<S> v = Eigen::Map<const RowMajor>(src.data(), rows, cols);
    Tape<S>* t = a.tape;
    const int out = t->next_id();
    return t->record(std::move(v), {a}, [t, a, out] {
        RowMajor g = t->upstream(out);
        Mat<S> ga = Eigen::Map<const RowMajor>(g.data(), a.rows(), a.cols());
        t->accumulate(a, ga);
    });
}

/// Rows of `table` selected by `ids` (embedding lookup); backward scatter-adds.
template <typename S>
Var<S> gather_rows(Var<S> table, std::span<const int> ids) {
    Mat<S> v(static_cast<Eigen::Index>(ids.size()), table.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= table.rows()) throw ShapeError("gather_rows: id out of range");
        v.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
    }
    Tape<S>* t = table.tape;
    const int out = t->next_id();
    std::vector<int> idv(ids.begin(), ids.end());
    return t->record(std::move(v), {table}, [t, table, idv, out] {
        const Mat<S>& g = t->upstream(out);
        Mat<S> gt = Mat<S>::Zero(table.rows(), table.cols());
        for (std::size_t i = 0; i < idv.size(); ++i) gt.row(idv[i]) += g.row(static_cast<Eigen::Index>(i));
        t->accumulate(table, gt);
    });
}

/// Copy of a with row `r` replaced by the 1 x c variable `row`.
template <typename S>
Var<S> set_row(Var<S> a, Eigen::Index r, Var<S> row) {
    if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("set_row: row shape mismatch");
    if (r < 0 || r >= a.rows()) throw ShapeError("set_row: row index out of range");
    Mat<S> v = a.value();
    v.row(r) = row.value();
    Tape<S>* t = a.tape;
    const int out = t->next_id();
    return t->record(std::move(v), {a, row}, [t, a, r, row, out] {
        const Mat<S>& g = t->upstream(out);
        if (t->requires_grad(a)) {
            Mat<S> ga = g;
            ga.row(r).setZero();
            t->accumulate(a, ga);
        }
        t->accumulate(row, g.row(r));
    });
}

/// Mean token-level cross-entropy of row-wise logits against target ids.
template <typename S>
Var<S> cross_entropy(Var<S> logits, std::span<const int> targets) {
    if (static_cast<Eigen::Index>(targets.size()) != logits.rows()) {
        throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(logits.rows()) + " rows");
    }
    const Eigen::Index n = logits.rows();
    Mat<S> probs(n, logits.cols());
    S total = 0;
    for (Eigen::Index r = 0; r < n; ++r) {
        const int y = targets[static_cast<std::size_t>(r)];
        if (y < 0 || y >= logits.cols()) throw ShapeError("cross_entropy: target id out of range");
        const S mx = logits.value().row(r).maxCoeff();
        probs.row(r) = (logits.value().row(r).array() - mx).exp();
        const S z = probs.row(r).sum();
        probs.row(r) /= z;
        total += -(logits.value()(r, y) - mx - std::log(z));
    }
    Tape<S>* t = logits.tape;
    const int out = t->next_id();
    std::vector<int> ys(targets.begin(), targets.end());
    return t->record(Mat<S>::Constant(1, 1, total / static_cast<S>(n)), {logits},
                     [t, logits, probs, ys, out] {
                         const S g = t->upstream(out)(0, 0) / static_cast<S>(ys.size());
                         Mat<S> gl = probs;
                         for (std::size_t r = 0; r < ys.size(); ++r) gl(static_cast<Eigen::Index>(r), ys[r]) -= S(1);
                         t->accumulate(logits, gl * g);
                     });
}

}  // namespace trajseg::ops

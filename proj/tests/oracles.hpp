#pragma once

// Brute-force reference implementations used by the unit tests and the
// acceptance runner. They deliberately avoid the library's kernels: plain
// loops over std::vector, tent-function interpolation instead of the
// floor/ceil form, pairwise distances instead of disk dilation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "trajseg/data/scene.hpp"
#include "trajseg/numerics/kernels.hpp"

namespace oracle {

using trajseg::Box;
using trajseg::Mask;
using trajseg::Mat;

// ---- generators ----------------------------------------------------------

inline Mat<double> random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo = -1, double hi = 1) {
    std::uniform_real_distribution<double> u(lo, hi);
    Mat<double> m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = u(rng);
    return m;
}

inline Mask random_mask(std::mt19937_64& rng, Eigen::Index h, Eigen::Index w, double density) {
    std::bernoulli_distribution b(density);
    Mask m(h, w);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = b(rng) ? 1 : 0;
    return m;
}

/// A blob-like mask: a random rectangle, sometimes empty, sometimes with holes.
inline Mask random_blob(std::mt19937_64& rng, Eigen::Index h, Eigen::Index w) {
    Mask m = Mask::Zero(h, w);
    std::uniform_int_distribution<int> kind(0, 5);
    const int k = kind(rng);
    if (k == 0) return m;
    if (k == 1) return random_mask(rng, h, w, 0.4);
    std::uniform_int_distribution<Eigen::Index> ry(0, h - 1), rx(0, w - 1);
    Eigen::Index y0 = ry(rng), y1 = ry(rng), x0 = rx(rng), x1 = rx(rng);
    if (y0 > y1) std::swap(y0, y1);
    if (x0 > x1) std::swap(x0, x1);
    for (Eigen::Index y = y0; y <= y1; ++y) {
        for (Eigen::Index x = x0; x <= x1; ++x) m(y, x) = 1;
    }
    if (k == 5) m(ry(rng), rx(rng)) = 0;
    return m;
}

inline Box random_box(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (;;) {
        double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
        if (a > b) std::swap(a, b);
        if (c > d) std::swap(c, d);
        if (b - a > 1e-3 && d - c > 1e-3) return {a, c, b, d};
    }
}

// ---- numerics ------------------------------------------------------------

/// softmax(q k^T / sqrt(d)) v with explicit loops.
inline Mat<double> attention(const Mat<double>& q, const Mat<double>& k, const Mat<double>& v) {
    const auto n = q.rows(), m = k.rows(), d = q.cols(), dv = v.cols();
    Mat<double> out = Mat<double>::Zero(n, dv);
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<double> s(static_cast<std::size_t>(m));
        double mx = -1e300;
        for (Eigen::Index j = 0; j < m; ++j) {
            double dot = 0;
            for (Eigen::Index c = 0; c < d; ++c) dot += q(i, c) * k(j, c);
            s[static_cast<std::size_t>(j)] = dot / std::sqrt(static_cast<double>(d));
            mx = std::max(mx, s[static_cast<std::size_t>(j)]);
        }
        double z = 0;
        for (auto& x : s) {
            x = std::exp(x - mx);
            z += x;
        }
        for (Eigen::Index j = 0; j < m; ++j) {
            for (Eigen::Index c = 0; c < dv; ++c) out(i, c) += s[static_cast<std::size_t>(j)] / z * v(j, c);
        }
    }
    return out;
}

inline double tent(double t) { return std::max(0.0, 1.0 - std::abs(t)); }

/// Bilinear value of channel c of an h x w map (rows = h*w) at continuous
/// cell coordinates (x, y), clamped to the grid, as a sum of tent weights
/// over every cell.
inline double bilinear(const Mat<double>& f, Eigen::Index h, Eigen::Index w, Eigen::Index c, double x, double y) {
    x = std::min(std::max(x, 0.0), static_cast<double>(w - 1));
    y = std::min(std::max(y, 0.0), static_cast<double>(h - 1));
    double s = 0;
    for (Eigen::Index r = 0; r < h; ++r) {
        for (Eigen::Index q = 0; q < w; ++q) s += tent(x - static_cast<double>(q)) * tent(y - static_cast<double>(r)) * f(r * w + q, c);
    }
    return s;
}

/// One sample at each bin center, pixel (r, q) centered at (q + 0.5, r + 0.5).
inline Mat<double> roi_align(const Mat<double>& f, Eigen::Index h, Eigen::Index w, const Box& b, Eigen::Index p) {
    Mat<double> out(p * p, f.cols());
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            // continuous image position of the bin center, then to cell coordinates
            const double px = (b.x0 + (b.x1 - b.x0) * (static_cast<double>(j) + 0.5) / static_cast<double>(p)) * static_cast<double>(w);
            const double py = (b.y0 + (b.y1 - b.y0) * (static_cast<double>(i) + 0.5) / static_cast<double>(p)) * static_cast<double>(h);
            for (Eigen::Index c = 0; c < f.cols(); ++c) out(i * p + j, c) = bilinear(f, h, w, c, px - 0.5, py - 0.5);
        }
    }
    return out;
}

/// Bilinear upsampling of an h x w map by `factor`, half-pixel centers.
inline Mat<double> upsample(const Mat<double>& x, int factor) {
    const Eigen::Index h = x.rows(), w = x.cols();
    Mat<double> flat(h * w, 1);
    for (Eigen::Index r = 0; r < h; ++r) {
        for (Eigen::Index c = 0; c < w; ++c) flat(r * w + c, 0) = x(r, c);
    }
    Mat<double> out(h * factor, w * factor);
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        for (Eigen::Index c = 0; c < out.cols(); ++c) {
            const double sx = (static_cast<double>(c) + 0.5) / factor - 0.5;
            const double sy = (static_cast<double>(r) + 0.5) / factor - 0.5;
            out(r, c) = bilinear(flat, h, w, 0, sx, sy);
        }
    }
    return out;
}

inline double bce(const Mat<double>& p, const Mat<double>& g, double delta = 1e-7) {
    double s = 0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double q = std::min(std::max(p(i), delta), 1 - delta);
        s += g(i) > 0.5 ? -std::log(q) : -std::log(1 - q);
    }
    return s / static_cast<double>(p.size());
}

inline double dice(const Mat<double>& p, const Mat<double>& g, double eps = 1.0) {
    double inter = 0, sp = 0, sg = 0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        inter += p(i) * g(i);
        sp += p(i);
        sg += g(i);
    }
    return 1 - (2 * inter + eps) / (sp + sg + eps);
}

inline double cross_entropy(const Mat<double>& logits, const std::vector<int>& targets) {
    double s = 0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        double z = 0;
        for (Eigen::Index c = 0; c < logits.cols(); ++c) z += std::exp(logits(r, c));
        s += std::log(z) - logits(r, targets[static_cast<std::size_t>(r)]);
    }
    return s / static_cast<double>(logits.rows());
}

// ---- metrics -------------------------------------------------------------

inline double iou(const Mask& a, const Mask& b) {
    long long inter = 0, uni = 0;
    for (Eigen::Index y = 0; y < a.rows(); ++y) {
        for (Eigen::Index x = 0; x < a.cols(); ++x) {
            if (a(y, x) && b(y, x)) ++inter;
            if (a(y, x) || b(y, x)) ++uni;
        }
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double mean_percent(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : 100.0 * s / static_cast<double>(v.size());
}

inline double jaccard(const std::vector<Mask>& pred, const std::vector<Mask>& gt) {
    std::vector<double> v;
    for (std::size_t t = 0; t < pred.size(); ++t) v.push_back(iou(pred[t], gt[t]));
    return mean_percent(v);
}

/// Foreground minus its 4-neighbour erosion (outside counts as background).
inline Mask boundary(const Mask& m) {
    Mask eroded = Mask::Zero(m.rows(), m.cols());
    for (Eigen::Index y = 1; y + 1 < m.rows(); ++y) {
        for (Eigen::Index x = 1; x + 1 < m.cols(); ++x) {
            eroded(y, x) = (m(y, x) && m(y - 1, x) && m(y + 1, x) && m(y, x - 1) && m(y, x + 1)) ? 1 : 0;
        }
    }
    Mask b(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.size(); ++i) b(i) = (m(i) && !eroded(i)) ? 1 : 0;
    return b;
}

/// F-measure with matches decided by checking every pair of boundary pixels.
inline double boundary_f_frame(const Mask& pred, const Mask& gt, int tol) {
    const Mask bp = boundary(pred), bg = boundary(gt);
    std::vector<std::pair<long long, long long>> ps, gs;
    for (Eigen::Index y = 0; y < bp.rows(); ++y) {
        for (Eigen::Index x = 0; x < bp.cols(); ++x) {
            if (bp(y, x)) ps.emplace_back(y, x);
            if (bg(y, x)) gs.emplace_back(y, x);
        }
    }
    if (ps.empty() && gs.empty()) return 1.0;
    if (ps.empty() || gs.empty()) return 0.0;
    auto near = [tol](const auto& a, const auto& b) {
        const long long dy = a.first - b.first, dx = a.second - b.second;
        return dy * dy + dx * dx <= static_cast<long long>(tol) * tol;
    };
    long long mp = 0, mg = 0;
    for (const auto& p : ps) mp += std::any_of(gs.begin(), gs.end(), [&](const auto& g) { return near(p, g); }) ? 1 : 0;
    for (const auto& g : gs) mg += std::any_of(ps.begin(), ps.end(), [&](const auto& p) { return near(p, g); }) ? 1 : 0;
    const double precision = static_cast<double>(mp) / static_cast<double>(ps.size());
    const double recall = static_cast<double>(mg) / static_cast<double>(gs.size());
    if (precision + recall == 0) return 0.0;
    return 2 * precision * recall / (precision + recall);
}

inline int tolerance(Eigen::Index h, Eigen::Index w) {
    return static_cast<int>(std::ceil(0.008 * std::sqrt(static_cast<double>(h * h + w * w))));
}

inline double boundary_f(const std::vector<Mask>& pred, const std::vector<Mask>& gt) {
    std::vector<double> v;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        v.push_back(boundary_f_frame(pred[t], gt[t], tolerance(gt[t].rows(), gt[t].cols())));
    }
    return mean_percent(v);
}

struct Temporal {
    double adjacent;
    double variance;
};

inline Temporal temporal(const std::vector<Mask>& pred, const std::vector<Mask>& gt) {
    std::vector<double> adj, q;
    for (std::size_t t = 0; t + 1 < pred.size(); ++t) adj.push_back(iou(pred[t], pred[t + 1]));
    for (std::size_t t = 0; t < pred.size(); ++t) q.push_back(iou(pred[t], gt[t]));
    double mean = 0;
    for (double x : q) mean += x;
    mean /= static_cast<double>(q.size());
    double var = 0;
    for (double x : q) var += (x - mean) * (x - mean);
    var /= static_cast<double>(q.size());
    return {mean_percent(adj), 100.0 * var};
}

}  // namespace oracle

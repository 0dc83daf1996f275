#include "trajseg/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "trajseg/errors.hpp"

namespace trajseg {

namespace {

void require_same_shape(const Mask& a, const Mask& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError("mask shape mismatch: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
}

void require_same_length(std::size_t a, std::size_t b) {
    if (a != b) throw ShapeError("trajectory length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
}

double mean_percent(const std::vector<double>& v) {
    if (v.empty()) return 0;
    double s = 0;
    for (double x : v) s += x;
    return 100.0 * s / static_cast<double>(v.size());
}

/// Boundary pixels of `b` grown by a disk of radius r.
Mask dilate_disk(const Mask& b, int r) {
    Mask out = Mask::Zero(b.rows(), b.cols());
    for (Eigen::Index y = 0; y < b.rows(); ++y) {
        for (Eigen::Index x = 0; x < b.cols(); ++x) {
            if (b(y, x) == 0) continue;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    if (dx * dx + dy * dy > r * r) continue;
                    const Eigen::Index yy = y + dy, xx = x + dx;
                    if (yy < 0 || xx < 0 || yy >= b.rows() || xx >= b.cols()) continue;
                    out(yy, xx) = 1;
                }
            }
        }
    }
    return out;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

double mask_iou(const Mask& a, const Mask& b) {
    require_same_shape(a, b);
    long long inter = 0, uni = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const bool x = a(i) != 0, y = b(i) != 0;
        inter += (x && y) ? 1 : 0;
        uni += (x || y) ? 1 : 0;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

FrameScores jaccard(std::span<const Mask> pred, std::span<const Mask> gt) {
    require_same_length(pred.size(), gt.size());
    FrameScores s;
    for (std::size_t t = 0; t < pred.size(); ++t) s.per_frame.push_back(mask_iou(pred[t], gt[t]));
    s.mean = mean_percent(s.per_frame);
    return s;
}

Mask boundary_mask(const Mask& m) {
    Mask out = Mask::Zero(m.rows(), m.cols());
    auto fg = [&](Eigen::Index y, Eigen::Index x) {
        return y >= 0 && x >= 0 && y < m.rows() && x < m.cols() && m(y, x) != 0;
    };
    for (Eigen::Index y = 0; y < m.rows(); ++y) {
        for (Eigen::Index x = 0; x < m.cols(); ++x) {
            if (!fg(y, x)) continue;
            if (!fg(y - 1, x) || !fg(y + 1, x) || !fg(y, x - 1) || !fg(y, x + 1)) out(y, x) = 1;
        }
    }
    return out;
}

int boundary_tolerance(Eigen::Index height, Eigen::Index width) {
    const double diag = std::sqrt(static_cast<double>(height * height + width * width));
    return static_cast<int>(std::ceil(0.008 * diag));
}

double frame_boundary_f(const Mask& pred, const Mask& gt, int tolerance) {
    require_same_shape(pred, gt);
    const Mask bp = boundary_mask(pred);
    const Mask bg = boundary_mask(gt);
    const long long np = bp.cast<long long>().sum();
    const long long ng = bg.cast<long long>().sum();
    if (np == 0 && ng == 0) return 1.0;
    if (np == 0 || ng == 0) return 0.0;
    const Mask near_gt = dilate_disk(bg, tolerance);
    const Mask near_pred = dilate_disk(bp, tolerance);
    long long matched_p = 0, matched_g = 0;
    for (Eigen::Index i = 0; i < bp.size(); ++i) {
        matched_p += (bp(i) != 0 && near_gt(i) != 0) ? 1 : 0;
        matched_g += (bg(i) != 0 && near_pred(i) != 0) ? 1 : 0;
    }
    const double precision = static_cast<double>(matched_p) / static_cast<double>(np);
    const double recall = static_cast<double>(matched_g) / static_cast<double>(ng);
    if (precision + recall == 0) return 0.0;
    return 2 * precision * recall / (precision + recall);
}

FrameScores boundary_f(std::span<const Mask> pred, std::span<const Mask> gt) {
    require_same_length(pred.size(), gt.size());
    FrameScores s;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        s.per_frame.push_back(frame_boundary_f(pred[t], gt[t], boundary_tolerance(gt[t].rows(), gt[t].cols())));
    }
    s.mean = mean_percent(s.per_frame);
    return s;
}

TemporalScores temporal_metrics(std::span<const Mask> pred, std::span<const Mask> gt) {
    require_same_length(pred.size(), gt.size());
    if (pred.size() < 2) throw InputError("temporal metrics need at least two frames");
    std::vector<double> adjacent;
    for (std::size_t t = 0; t + 1 < pred.size(); ++t) adjacent.push_back(mask_iou(pred[t], pred[t + 1]));
    const std::vector<double> quality = jaccard(pred, gt).per_frame;
    double mean = 0;
    for (double q : quality) mean += q;
    mean /= static_cast<double>(quality.size());
    double var = 0;
    for (double q : quality) var += (q - mean) * (q - mean);
    var /= static_cast<double>(quality.size());
    return {mean_percent(adjacent), 100.0 * var};
}

VideoReport evaluate_video(const std::string& name, std::span<const Mask> pred, std::span<const Mask> gt) {
    if (pred.size() != gt.size()) {
        throw InputError("video " + name + ": " + std::to_string(pred.size()) + " predicted frames for " +
                         std::to_string(gt.size()) + " ground-truth frames");
    }
    VideoReport r;
    r.name = name;
    r.frames = static_cast<int>(gt.size());
    r.j = jaccard(pred, gt).mean;
    r.f = boundary_f(pred, gt).mean;
    r.jf = (r.j + r.f) / 2;
    if (gt.size() >= 2) r.temporal = temporal_metrics(pred, gt);
    return r;
}

MetricReport aggregate(std::vector<VideoReport> videos) {
    MetricReport m;
    m.videos = std::move(videos);
    if (m.videos.empty()) return m;
    int temporal = 0;
    for (const auto& v : m.videos) {
        m.j += v.j;
        m.f += v.f;
        if (v.temporal) {
            m.avg_iou_adjacent += v.temporal->avg_iou_adjacent;
            m.t_iou_var += v.temporal->t_iou_var;
            ++temporal;
        }
    }
    const double n = static_cast<double>(m.videos.size());
    m.j /= n;
    m.f /= n;
    m.jf = (m.j + m.f) / 2;
    if (temporal > 0) {
        m.avg_iou_adjacent /= temporal;
        m.t_iou_var /= temporal;
    }
    return m;
}

std::vector<BucketRow> length_buckets(std::span<const VideoReport> videos, std::span<const int> edges) {
    if (edges.size() < 2) throw InputError("length buckets need at least two edges");
    for (std::size_t i = 1; i < edges.size(); ++i) {
        if (edges[i] <= edges[i - 1]) throw InputError("length bucket edges must be strictly increasing");
    }
    std::vector<BucketRow> rows;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        BucketRow row{edges[i], edges[i + 1], 0, std::nullopt};
        double sum = 0;
        for (const auto& v : videos) {
            if (v.frames < row.lo || v.frames >= row.hi) continue;
            sum += v.jf;
            ++row.count;
        }
        if (row.count > 0) row.mean_jf = sum / row.count;
        rows.push_back(row);
    }
    return rows;
}

std::string report_csv(const MetricReport& report) {
    std::string out = "video,frames,J,F,JF,avg_iou_adjacent,t_iou_var\n";
    auto line = [&](const std::string& name, const std::string& frames, double j, double f, double jf,
                    const std::string& adj, const std::string& var) {
        out += name + "," + frames + "," + fmt(j) + "," + fmt(f) + "," + fmt(jf) + "," + adj + "," + var + "\n";
    };
    for (const auto& v : report.videos) {
        line(v.name, std::to_string(v.frames), v.j, v.f, v.jf, v.temporal ? fmt(v.temporal->avg_iou_adjacent) : "",
             v.temporal ? fmt(v.temporal->t_iou_var) : "");
    }
    line("mean", "", report.j, report.f, report.jf, fmt(report.avg_iou_adjacent), fmt(report.t_iou_var));
    return out;
}

std::string report_table(const MetricReport& report) {
    std::size_t width = 5;
    for (const auto& v : report.videos) width = std::max(width, v.name.size());
    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof(buf), "%-*s %6s %8s %8s %8s %8s %9s\n", static_cast<int>(width), "video", "frames", "J",
                  "F", "J&F", "IoU_adj", "T-IoU-Var");
    out += buf;
    for (const auto& v : report.videos) {
        std::snprintf(buf, sizeof(buf), "%-*s %6d %8.2f %8.2f %8.2f %8s %9s\n", static_cast<int>(width), v.name.c_str(),
                      v.frames, v.j, v.f, v.jf, v.temporal ? fmt(v.temporal->avg_iou_adjacent).c_str() : "-",
                      v.temporal ? fmt(v.temporal->t_iou_var).c_str() : "-");
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "%-*s %6s %8.2f %8.2f %8.2f %8.2f %9.2f\n", static_cast<int>(width), "mean", "",
                  report.j, report.f, report.jf, report.avg_iou_adjacent, report.t_iou_var);
    out += buf;
    return out;
}

std::string buckets_csv(std::span<const BucketRow> rows) {
    std::string out = "lo,hi,count,mean_jf\n";
    for (const auto& r : rows) {
        out += std::to_string(r.lo) + "," + std::to_string(r.hi) + "," + std::to_string(r.count) + "," +
               (r.mean_jf ? fmt(*r.mean_jf) : std::string("absent")) + "\n";
    }
    return out;
}

}  // namespace trajseg

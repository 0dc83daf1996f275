#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trajseg/data/scene.hpp"

namespace trajseg {

/// |a & b| / |a | b|; both empty -> 1, exactly one empty -> 0.
[[nodiscard]] double mask_iou(const Mask& a, const Mask& b);

struct FrameScores {
    std::vector<double> per_frame;  // fractions in [0, 1]
    double mean = 0;                // percent
};

[[nodiscard]] FrameScores jaccard(std::span<const Mask> pred, std::span<const Mask> gt);

/// Foreground pixels with at least one 4-neighbour in the background; pixels
/// outside the image count as background.
[[nodiscard]] Mask boundary_mask(const Mask& m);

/// ceil(0.008 * image diagonal).
[[nodiscard]] int boundary_tolerance(Eigen::Index height, Eigen::Index width);

/// Contour F-measure of one frame: a boundary pixel is matched when a
/// boundary pixel of the other mask lies within Euclidean distance `tolerance`.
[[nodiscard]] double frame_boundary_f(const Mask& pred, const Mask& gt, int tolerance);

[[nodiscard]] FrameScores boundary_f(std::span<const Mask> pred, std::span<const Mask> gt);

struct TemporalScores {
    double avg_iou_adjacent = 0;  // percent
    double t_iou_var = 0;         // population variance of per-frame IoU with ground truth, x100
};

/// Throws InputError for fewer than two frames.
[[nodiscard]] TemporalScores temporal_metrics(std::span<const Mask> pred, std::span<const Mask> gt);

struct VideoReport {
    std::string name;
    int frames = 0;
    double j = 0;
    double f = 0;
    double jf = 0;
    std::optional<TemporalScores> temporal;  // absent for single-frame videos
};

[[nodiscard]] VideoReport evaluate_video(const std::string& name, std::span<const Mask> pred, std::span<const Mask> gt);

struct MetricReport {
    std::vector<VideoReport> videos;
    double j = 0;
    double f = 0;
    double jf = 0;
    double avg_iou_adjacent = 0;
    double t_iou_var = 0;
};

/// Means over videos in order (temporal means over videos that have them).
[[nodiscard]] MetricReport aggregate(std::vector<VideoReport> videos);

struct BucketRow {
    int lo = 0;
    int hi = 0;  // exclusive
    int count = 0;
    std::optional<double> mean_jf;  // absent when the bucket is empty
};

/// Buckets [edges[i], edges[i+1]) by frame count; edges must be strictly increasing.
[[nodiscard]] std::vector<BucketRow> length_buckets(std::span<const VideoReport> videos, std::span<const int> edges);

[[nodiscard]] std::string report_csv(const MetricReport& report);
[[nodiscard]] std::string report_table(const MetricReport& report);
[[nodiscard]] std::string buckets_csv(std::span<const BucketRow> rows);

}  // namespace trajseg

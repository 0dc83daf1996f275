#pragma once

#include <span>
#include <vector>

#include "trajseg/model/vision.hpp"
#include "trajseg/model/vocabulary.hpp"

namespace trajseg {

/// Frames that fill the encoder's fixed slots: every present frame when they
/// fit, otherwise a uniform subsample floor(i * N_o / slots).
inline std::vector<int> trajectory_slot_frames(const ObjectTrajectory& traj, int slots) {
    const std::vector<int> present = traj.present_frames();
    const int n = static_cast<int>(present.size());
    if (n <= slots) return present;
    std::vector<int> out;
    for (int i = 0; i < slots; ++i) out.push_back(present[static_cast<std::size_t>(i * n / slots)]);
    return out;
}

/// Turns an object's per-frame regions into one C-vector: ROI-align on each
/// selected frame, pooled (or flattened) per slot, zero-padded to a fixed
/// slot count, concatenated, and mapped by one linear layer.
class TrajectoryEncoder {
public:
    TrajectoryEncoder() = default;

    template <typename S>
    TrajectoryEncoder(ParamInit<S> init, const RunConfig& cfg)
        : slots_(cfg.traj_slots), roi_size_(cfg.roi_size), channels_(cfg.channels), mode_(cfg.traj_mode) {
        linear_ = Linear::create(init, "linear", slots_ * slot_width(), channels_);
        projector_ = Linear::create(init, "projector", channels_, channels_);
    }

    [[nodiscard]] int slot_width() const {
        return mode_ == TrajectoryMode::pooled ? channels_ : roi_size_ * roi_size_ * channels_;
    }
    [[nodiscard]] int slots() const { return slots_; }
    [[nodiscard]] const Linear& linear() const { return linear_; }
    [[nodiscard]] const Linear& projector() const { return projector_; }

    /// Per-slot vectors before the linear map, (1 x slots*slot_width).
    template <typename S>
    Var<S> slot_features(Graph<S>& g, std::span<const FrameFeatures<S>> frames, const ObjectTrajectory& traj) const {
        if (traj.present_count() == 0) throw InputError("encode_trajectory: trajectory has no present frames");
        if (static_cast<int>(frames.size()) != traj.frame_count()) {
            throw ShapeError("encode_trajectory: " + std::to_string(frames.size()) + " feature maps for " +
                             std::to_string(traj.frame_count()) + " trajectory frames");
        }
        traj.validate();
        std::vector<Var<S>> parts;
        for (int t : trajectory_slot_frames(traj, slots_)) {
            const FrameFeatures<S>& f = frames[static_cast<std::size_t>(t)];
            Var<S> roi = roi_align(f.patches, f.grid_h, f.grid_w, *traj.boxes[static_cast<std::size_t>(t)], roi_size_);
            parts.push_back(mode_ == TrajectoryMode::pooled ? ops::mean_rows(roi)
                                                            : ops::reshape(roi, 1, roi.value().size()));
        }
        const int pad = slots_ - static_cast<int>(parts.size());
        if (pad > 0) parts.push_back(g.constant(Mat<S>::Zero(1, static_cast<Eigen::Index>(pad) * slot_width())));
        return ops::concat_cols(std::span<const Var<S>>(parts));
    }

    template <typename S>
    Var<S> encode(Graph<S>& g, std::span<const FrameFeatures<S>> frames, const ObjectTrajectory& traj) const {
        return linear_(g, slot_features(g, frames, traj));
    }

    /// Maps f_traj into the reasoner's embedding space.
    template <typename S>
    Var<S> project(Graph<S>& g, Var<S> f_traj) const {
        return projector_(g, f_traj);
    }

private:
    int slots_ = 8;
    int roi_size_ = 4;
    int channels_ = 64;
    TrajectoryMode mode_ = TrajectoryMode::pooled;
    Linear linear_;
    Linear projector_;
};

/// Embeds `ids` through `table` and puts `slot` at the single placeholder
/// position. Zero or several placeholders is an input error.
template <typename S>
Var<S> insert_placeholder(std::span<const int> ids, Var<S> table, Var<S> slot) {
    int position = -1;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] != Vocabulary::kPlaceholder) continue;
        if (position >= 0) throw InputError("instruction contains more than one placeholder");
        position = static_cast<int>(i);
    }
    if (position < 0) throw InputError("instruction contains no placeholder");
    return ops::set_row(ops::gather_rows(table, ids), position, slot);
}

}  // namespace trajseg

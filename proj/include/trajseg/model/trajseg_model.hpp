#pragma once

#include <map>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "trajseg/model/fci.hpp"
#include "trajseg/model/mask_generator.hpp"
#include "trajseg/model/reasoner.hpp"
#include "trajseg/model/trajectory_encoder.hpp"
#include "trajseg/model/vision.hpp"

namespace trajseg {

/// Uniformly spaced key frames: floor(i * frames / k) for i < k. k larger
/// than the video is clamped to every frame.
inline std::vector<int> uniform_key_frames(int frames, int k) {
    if (frames < 1) throw InputError("video has no frames");
    if (k < 1) throw InputError("at least one key frame is required");
    k = std::min(k, frames);
    std::vector<int> out;
    for (int i = 0; i < k; ++i) out.push_back(static_cast<int>(static_cast<long long>(i) * frames / k));
    return out;
}

template <typename S>
struct ForwardResult {
    std::optional<Var<S>> text_loss;        // absent for tracking samples
    std::vector<std::optional<MaskPrediction<S>>> predictions;  // per frame; empty slot = not predicted
    std::optional<Var<S>> x_traj;
};

template <typename S>
struct InferenceResult {
    std::vector<int> response;
    bool trj_appended = false;
    std::vector<Mat<S>> probabilities;  // emitted per frame (presence-gated)
    std::vector<S> presence;
};

/// The full network: vision encoder, trajectory encoder, reasoner, FCI and
/// mask generator. Holds parameter indices only; weights live in a ParamStore.
class TrajSegModel {
public:
    TrajSegModel() = default;

    template <typename S>
    TrajSegModel(const RunConfig& cfg, int vocab_size, ParamStore<S>& store) : cfg_(cfg) {
        cfg.validate();
        std::mt19937_64 rng(cfg.model_seed);
        ParamInit<S> root(store, rng, "");
        vision_ = VisionEncoder(root.scope("vision"), cfg);
        trajectory_ = TrajectoryEncoder(root.scope("trajectory"), cfg);
        reasoner_ = Reasoner(root.scope("reasoner"), cfg, vocab_size);
        fci_ = FrameContentIntegration(root.scope("fci"), cfg);
        masks_ = MaskGenerator(root.scope("mask"), cfg);
    }

    [[nodiscard]] const RunConfig& config() const { return cfg_; }
    [[nodiscard]] const VisionEncoder& vision() const { return vision_; }
    [[nodiscard]] const TrajectoryEncoder& trajectory_encoder() const { return trajectory_; }
    [[nodiscard]] const Reasoner& reasoner() const { return reasoner_; }
    [[nodiscard]] const FrameContentIntegration& fci() const { return fci_; }
    [[nodiscard]] const MaskGenerator& mask_generator() const { return masks_; }

    template <typename S>
    std::vector<FrameFeatures<S>> encode_frames(Graph<S>& g, std::span<const FrameInput<S>> frames) const {
        std::vector<FrameFeatures<S>> out;
        out.reserve(frames.size());
        for (const auto& f : frames) out.push_back(vision_.encode(g, f));
        return out;
    }

    /// One mean-pooled token per key frame, K x C.
    template <typename S>
    Var<S> visual_tokens(std::span<const FrameFeatures<S>> feats, std::span<const int> keys) const {
        std::vector<Var<S>> rows;
        for (int k : keys) rows.push_back(ops::mean_rows(feats[static_cast<std::size_t>(k)].patches));
        return rows.size() == 1 ? rows.front() : ops::concat_rows(std::span<const Var<S>>(rows));
    }

    /// Frame tokens for the key frames: FCI-expanded, or x_traj itself when
    /// FCI is disabled.
    template <typename S>
    std::map<int, Var<S>> frame_tokens(Graph<S>& g, Var<S> x_traj, std::span<const FrameFeatures<S>> feats,
                                       std::span<const int> keys) const {
        std::map<int, Var<S>> out;
        for (int k : keys) {
            out[k] = cfg_.use_fci ? fci_.expand_one(g, x_traj, feats[static_cast<std::size_t>(k)].patches) : x_traj;
        }
        return out;
    }

    /// Teacher-forced training pass. Tracking samples need the ground-truth
    /// masks: the first frame where the target is present seeds the memory.
    template <typename S>
    ForwardResult<S> forward(Graph<S>& g, const Sample& sample, std::span<const FrameInput<S>> frames,
                             const std::vector<Mat<S>>* gt_masks = nullptr) const {
        const std::vector<FrameFeatures<S>> feats = encode_frames(g, frames);
        const std::span<const FrameFeatures<S>> fs(feats);
        ForwardResult<S> out;
        out.predictions.resize(feats.size());
        if (sample.kind == SampleKind::tracking) {
            if (gt_masks == nullptr || gt_masks->size() != feats.size()) {
                throw InputError("tracking sample needs one ground-truth mask per frame");
            }
            track(g, fs, *gt_masks, out);
            return out;
        }
        if (sample.key_frames.empty()) throw InputError("sample has no key frames");
        Var<S> visual = visual_tokens(fs, sample.key_frames);
        Var<S> slot;
        const Var<S>* slot_ptr = nullptr;
        if (sample.kind == SampleKind::captioning) {
            if (!sample.trajectory) throw InputError("captioning sample without trajectory");
            slot = trajectory_.project(g, trajectory_.encode(g, fs, *sample.trajectory));
            slot_ptr = &slot;
        }
        ReasonerOutput<S> r = reasoner_.teacher_forced(g, &visual, sample.input_ids, sample.target_ids, slot_ptr);
        out.text_loss = reasoner_.text_loss(r, sample.target_ids);
        Var<S> x_traj = reasoner_.extract_trj(g, r, sample.target_ids);
        out.x_traj = x_traj;
        auto preds = masks_.segment_video(g, fs, frame_tokens(g, x_traj, fs, sample.key_frames));
        for (std::size_t t = 0; t < preds.size(); ++t) out.predictions[t] = preds[t];
        return out;
    }

    /// Greedy decoding of the response, then segmentation from the <TRJ>
    /// hidden state. A response without <TRJ> gets one appended.
    template <typename S>
    InferenceResult<S> infer(const ParamStore<S>& params, std::span<const FrameInput<S>> frames,
                             std::span<const int> input_ids, std::span<const int> keys) const {
        Tape<S> tape;
        Graph<S> g(tape, params);
        const std::vector<FrameFeatures<S>> feats = encode_frames(g, frames);
        const std::span<const FrameFeatures<S>> fs(feats);
        for (int k : keys) {
            if (k < 0 || k >= static_cast<int>(feats.size())) throw InputError("key frame index out of range");
        }
        Var<S> visual = visual_tokens(fs, keys);
        const Mat<S> visual_value = visual.value();
        InferenceResult<S> out;
        out.response = reasoner_.generate(params, &visual_value, input_ids, static_cast<const Mat<S>*>(nullptr));
        int trj = 0;
        for (int id : out.response) trj += id == Vocabulary::kTrj ? 1 : 0;
        if (trj != 1) {
            std::vector<int> cleaned;
            for (int id : out.response) {
                if (id != Vocabulary::kTrj) cleaned.push_back(id);
            }
            cleaned.push_back(Vocabulary::kTrj);
            out.response = cleaned;
            out.trj_appended = true;
        }
        ReasonerOutput<S> r = reasoner_.teacher_forced(g, &visual, input_ids, out.response);
        Var<S> x_traj = reasoner_.extract_trj(g, r, out.response);
        auto preds = masks_.segment_video(g, fs, frame_tokens(g, x_traj, fs, keys));
        for (const auto& p : preds) {
            out.probabilities.push_back(emitted_probabilities(p, cfg_.presence_threshold));
            out.presence.push_back(p.presence_value());
        }
        return out;
    }

private:
    template <typename S>
    void track(Graph<S>& g, std::span<const FrameFeatures<S>> fs, const std::vector<Mat<S>>& gt,
               ForwardResult<S>& out) const {
        const int count = static_cast<int>(fs.size());
        int seed = -1;
        for (int t = 0; t < count && seed < 0; ++t) {
            if (gt[static_cast<std::size_t>(t)].sum() > S(0)) seed = t;
        }
        if (seed < 0) seed = 0;
        auto run = [&](int from, int to, int step) {
            MemoryBank<S> bank(masks_.capacity());
            const FrameFeatures<S>& f0 = fs[static_cast<std::size_t>(seed)];
            masks_.memory_write(g, bank, seed, f0.patches, g.constant(gt[static_cast<std::size_t>(seed)]), true,
                                f0.grid_h, f0.grid_w);
            for (int t = from; t != to; t += step) {
                const FrameFeatures<S>& f = fs[static_cast<std::size_t>(t)];
                MaskPrediction<S> p = masks_.predict(g, Prompt<S>(MemoryPrompt<S>{&bank}), f);
                masks_.memory_write(g, bank, t, f.patches, MaskGenerator::memory_mask(p), false, f.grid_h, f.grid_w);
                out.predictions[static_cast<std::size_t>(t)] = p;
            }
        };
        run(seed + 1, count, 1);
        if (seed > 0) run(seed - 1, -1, -1);
    }

    RunConfig cfg_;
    VisionEncoder vision_;
    TrajectoryEncoder trajectory_;
    Reasoner reasoner_;
    FrameContentIntegration fci_;
    MaskGenerator masks_;
};

}  // namespace trajseg

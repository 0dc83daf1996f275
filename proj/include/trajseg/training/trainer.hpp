#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "trajseg/data/dataset.hpp"
#include "trajseg/eval/metrics.hpp"
#include "trajseg/io/checkpoint.hpp"
#include "trajseg/model/trajseg_model.hpp"
#include "trajseg/training/losses.hpp"
#include "trajseg/training/mixing.hpp"
#include "trajseg/training/optimizer.hpp"

namespace trajseg {

/// Network inputs and supervision for one scheduled sample.
struct PreparedSample {
    Sample sample;
    std::vector<FrameInput<float>> inputs;
    std::vector<Mat<float>> masks;
    std::vector<int> presence;
};

/// Stage 2: the video itself with uniformly sampled key frames. Captioning
/// falls back to grounding when alignment training is disabled.
[[nodiscard]] PreparedSample prepare_video_sample(const VideoRecord& video, SampleKind kind, const Vocabulary& vocab,
                                                  const RunConfig& config);

/// Stage 1: a pseudo video made from the first frame showing the target,
/// described by appearance only, every frame a key frame.
[[nodiscard]] PreparedSample prepare_still_sample(const VideoRecord& video, SampleKind kind, const Vocabulary& vocab,
                                                  const RunConfig& config, std::uint64_t seed);

struct SampleLoss {
    double total = 0;
    double text = 0;
    double mask = 0;
    double cls = 0;
};

/// Forward + backward of one sample in float, gradients added into `grads`.
SampleLoss sample_loss(const TrajSegModel& model, const ParamStore<float>& params, const PreparedSample& sample,
                       int stage, Gradients<float>* grads);

struct StepLog {
    int stage = 0;
    long long step = 0;
    double total = 0;
    double text = 0;
    double mask = 0;
    double cls = 0;
};

[[nodiscard]] std::string loss_curve_csv(const std::vector<StepLog>& log);

/// Owns a model and its float weights; runs the two training stages.
class Trainer {
public:
    Trainer(const RunConfig& config, Vocabulary vocab);

    [[nodiscard]] const RunConfig& config() const { return config_; }
    [[nodiscard]] const TrajSegModel& model() const { return model_; }
    [[nodiscard]] const Vocabulary& vocabulary() const { return vocab_; }
    [[nodiscard]] ParamStore<float>& params() { return params_; }
    [[nodiscard]] const ParamStore<float>& params() const { return params_; }

    /// Replaces the weights with a checkpoint's (names and shapes must match).
    void load_weights(const ParamStore<float>& source);

    /// Called after every optimizer step; returning true stops the stage.
    using StepCallback = std::function<bool(const StepLog&)>;

    /// Runs stage 1 or 2 over `videos` for the configured epochs (or
    /// max_steps). Throws NumericError naming the step on a non-finite loss.
    std::vector<StepLog> train(int stage, const std::vector<VideoRecord>& videos, const StepCallback& on_step = {});

private:
    RunConfig config_;
    Vocabulary vocab_;
    ParamStore<float> params_;
    TrajSegModel model_;
};

/// Greedy inference on a video: emitted per-frame masks and presence scores.
struct VideoPrediction {
    std::vector<Mask> masks;
    std::vector<float> presence;
    std::vector<Mat<float>> probabilities;
    std::vector<int> response;
};

[[nodiscard]] VideoPrediction predict_video(const TrajSegModel& model, const ParamStore<float>& params,
                                            const Vocabulary& vocab, const std::vector<RgbImage>& frames,
                                            const std::string& instruction, int key_frames);

/// Grounding-style evaluation of every video with `key_frames` key frames.
[[nodiscard]] MetricReport evaluate_model(const TrajSegModel& model, const ParamStore<float>& params,
                                          const Vocabulary& vocab, const std::vector<VideoRecord>& videos,
                                          int key_frames, int threads = 1);

}  // namespace trajseg

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace trajseg {

enum class TrajectoryMode { pooled, flatten };

/// Every hyperparameter of a run. Each field has a default; config files
/// override a subset, and unknown keys are rejected.
struct RunConfig {
    // model
    int channels = 64;         // C, shared by vision features, reasoner width and tokens
    int attn_dim = 64;         // d of the frame-content integration attention
    int patch = 8;             // p, patch size of the vision encoder
    int roi_size = 4;          // P, ROI-align output size
    int traj_slots = 8;        // fixed number of per-frame slots in the trajectory encoder
    TrajectoryMode traj_mode = TrajectoryMode::pooled;
    int pixel_channels = 16;   // width of the full-resolution skip features
    bool pixel_skip = true;
    bool decoder_pos_enc = true;
    int layers = 2;
    int heads = 2;
    int max_len = 128;
    int mlp_ratio = 4;
    int memory_capacity = 6;   // R, non-key entries kept in the memory bank
    double presence_threshold = 0.5;
    bool use_fci = true;
    bool use_bialign = true;

    // data
    int frames = 10;           // T
    int key_frames = 5;        // T_key
    int height = 64;
    int width = 64;
    int train_videos = 512;
    int val_videos = 64;
    int max_objects = 3;
    double exit_probability = 0.2;

    // losses
    double lambda_text = 1.0;
    double lambda_mask = 1.0;
    double lambda_bce = 2.0;
    double lambda_dice = 0.5;
    double lambda_cls = 0.5;

    // optimization
    double learning_rate = 3e-4;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double grad_clip = 0.0;    // global-norm clip; 0 disables
    int batch_size = 8;
    int stage1_epochs = 2;
    int stage2_epochs = 14;
    int max_steps = 0;         // 0: run all epochs
    int stage1_frames = 3;
    int pseudo_jitter = 1;

    // data mixing
    double tracking_fraction = 0.2;
    double grounding_fraction = 0.4;
    double captioning_fraction = 0.4;

    // seeds
    std::uint64_t data_seed = 1;
    std::uint64_t model_seed = 1;
    std::uint64_t train_seed = 1;

    // paths, relative to root
    std::string root = ".";
    std::string dataset = "data";
    std::string checkpoint = "model.ckpt";
    std::string init_checkpoint;
    std::string output = "out";

    int threads = 0;           // 0: TRAJSEG_THREADS, else 1

    [[nodiscard]] bool operator==(const RunConfig&) const = default;

    /// Throws ConfigError when a field violates its range or the fields are
    /// mutually inconsistent.
    void validate() const;
};

/// Parses UTF-8 "key = value" lines; '#' starts a comment. Keys not present
/// keep their defaults.
[[nodiscard]] RunConfig parse_config(const std::string& text);
[[nodiscard]] RunConfig load_config(const std::string& path);

/// Applies one "key=value" override on top of an existing config.
void apply_config_override(RunConfig& config, const std::string& assignment);

/// Every field, one per line, in a fixed order; parse_config inverts it exactly.
[[nodiscard]] std::string serialize_config(const RunConfig& config);

[[nodiscard]] std::vector<std::string> config_keys();

}  // namespace trajseg

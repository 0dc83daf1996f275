#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "oracles.hpp"
#include "trajseg/io/config.hpp"
#include "trajseg/model/trajseg_model.hpp"

namespace fixture {

using namespace trajseg;

/// Small enough for exhaustive checks, big enough to exercise every path.
inline RunConfig tiny_config() {
    RunConfig c;
    c.channels = 8;
    c.attn_dim = 4;
    c.patch = 2;
    c.height = 8;
    c.width = 8;
    c.pixel_channels = 2;
    c.layers = 1;
    c.heads = 1;
    c.mlp_ratio = 2;
    c.max_len = 32;
    c.traj_slots = 3;
    c.roi_size = 2;
    c.memory_capacity = 2;
    c.frames = 4;
    c.key_frames = 2;
    return c;
}

/// Toy training config: 32x32 frames, 6 frames per video.
inline RunConfig toy_training_config() {
    RunConfig c;
    c.channels = 32;
    c.attn_dim = 32;
    c.patch = 4;
    c.height = 32;
    c.width = 32;
    c.pixel_channels = 8;
    c.frames = 6;
    c.key_frames = 3;
    c.max_len = 64;
    c.batch_size = 1;
    return c;
}

template <typename S>
FrameFeatures<S> random_features(Graph<S>& g, std::mt19937_64& rng, const RunConfig& c, bool with_pixels = true) {
    FrameFeatures<S> f;
    f.grid_h = c.height / c.patch;
    f.grid_w = c.width / c.patch;
    f.patch = c.patch;
    f.patches = g.constant(oracle::random_matrix(rng, f.grid_h * f.grid_w, c.channels).template cast<S>());
    if (with_pixels) f.pixels = g.constant(oracle::random_matrix(rng, c.height * c.width, c.pixel_channels).template cast<S>());
    return f;
}

/// Arbitrary values in every field, valid or not; for serialization round trips.
inline RunConfig random_config(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> small(-5, 1000);
    std::uniform_int_distribution<int> exponent(-300, 300);
    std::uniform_real_distribution<double> mantissa(-1.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    auto i = [&] { return small(rng); };
    auto d = [&] { return coin(rng) ? mantissa(rng) : std::ldexp(mantissa(rng), exponent(rng)); };
    auto u = [&] { return std::uniform_int_distribution<std::uint64_t>()(rng); };
    auto s = [&] {
        static const std::string alphabet = "abcXYZ019_-./ ";
        std::string out;
        const int n = std::uniform_int_distribution<int>(0, 12)(rng);
        for (int k = 0; k < n; ++k) out += alphabet[std::uniform_int_distribution<std::size_t>(0, alphabet.size() - 1)(rng)];
        while (!out.empty() && out.back() == ' ') out.pop_back();
        while (!out.empty() && out.front() == ' ') out.erase(out.begin());
        return out;
    };
    RunConfig c;
    c.channels = i(); c.attn_dim = i(); c.patch = i(); c.roi_size = i(); c.traj_slots = i();
    c.traj_mode = coin(rng) ? TrajectoryMode::pooled : TrajectoryMode::flatten;
    c.pixel_channels = i(); c.pixel_skip = coin(rng); c.decoder_pos_enc = coin(rng);
    c.layers = i(); c.heads = i(); c.max_len = i(); c.mlp_ratio = i(); c.memory_capacity = i();
    c.presence_threshold = d(); c.use_fci = coin(rng); c.use_bialign = coin(rng);
    c.frames = i(); c.key_frames = i(); c.height = i(); c.width = i(); c.train_videos = i(); c.val_videos = i();
    c.max_objects = i(); c.exit_probability = d();
    c.lambda_text = d(); c.lambda_mask = d(); c.lambda_bce = d(); c.lambda_dice = d(); c.lambda_cls = d();
    c.learning_rate = d(); c.weight_decay = d(); c.beta1 = d(); c.beta2 = d(); c.adam_eps = d(); c.grad_clip = d();
    c.batch_size = i(); c.stage1_epochs = i(); c.stage2_epochs = i(); c.max_steps = i(); c.stage1_frames = i();
    c.pseudo_jitter = i();
    c.tracking_fraction = d(); c.grounding_fraction = d(); c.captioning_fraction = d();
    c.data_seed = u(); c.model_seed = u(); c.train_seed = u();
    c.root = s(); c.dataset = s(); c.checkpoint = s(); c.init_checkpoint = s(); c.output = s();
    c.threads = i();
    return c;
}

/// Random mask with a random shape, including empty and degenerate sizes.
inline Mask random_shaped_mask(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> dim(1, 40);
    const int h = dim(rng), w = dim(rng);
    const double density = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    return std::bernoulli_distribution(0.5)(rng) ? oracle::random_mask(rng, h, w, density) : oracle::random_blob(rng, h, w);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("trajseg_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    [[nodiscard]] std::string str() const { return path_.string(); }

private:
    std::filesystem::path path_;
};

}  // namespace fixture

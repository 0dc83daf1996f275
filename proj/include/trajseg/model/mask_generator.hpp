#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "trajseg/model/vision.hpp"

namespace trajseg {

/// One remembered frame: mask-conditioned features plus their cached
/// attention keys and values.
template <typename S>
struct MemoryEntry {
    int frame = 0;
    bool is_key = false;
    Var<S> features;
    Var<S> keys;
    Var<S> values;
};

/// Ordered memory with unbounded key entries and at most `capacity`
/// non-key entries, evicted oldest first.
template <typename S>
class MemoryBank {
public:
    explicit MemoryBank(int capacity = 6) : capacity_(capacity) {
        if (capacity < 0) throw ConfigError("memory capacity must be nonnegative");
    }

    /// Appends `entry`; returns the frame index evicted to make room, if any.
    std::optional<int> write(MemoryEntry<S> entry) {
        if (contains(entry.frame)) {
            throw StateError("memory bank already holds frame " + std::to_string(entry.frame));
        }
        const bool key = entry.is_key;
        entries_.push_back(std::move(entry));
        if (key) return std::nullopt;
        if (non_key_count() <= capacity_) return std::nullopt;
        auto oldest = std::find_if(entries_.begin(), entries_.end(), [](const MemoryEntry<S>& e) { return !e.is_key; });
        const int evicted = oldest->frame;
        entries_.erase(oldest);
        return evicted;
    }

    [[nodiscard]] bool contains(int frame) const {
        return std::any_of(entries_.begin(), entries_.end(), [frame](const MemoryEntry<S>& e) { return e.frame == frame; });
    }
    [[nodiscard]] bool empty() const { return entries_.empty(); }
    [[nodiscard]] int size() const { return static_cast<int>(entries_.size()); }
    [[nodiscard]] int capacity() const { return capacity_; }
    [[nodiscard]] int key_count() const {
        return static_cast<int>(std::count_if(entries_.begin(), entries_.end(), [](const MemoryEntry<S>& e) { return e.is_key; }));
    }
    [[nodiscard]] int non_key_count() const { return size() - key_count(); }
    [[nodiscard]] const std::vector<MemoryEntry<S>>& entries() const { return entries_; }

    [[nodiscard]] std::vector<int> frames(bool key) const {
        std::vector<int> out;
        for (const auto& e : entries_) {
            if (e.is_key == key) out.push_back(e.frame);
        }
        return out;
    }

private:
    int capacity_;
    std::vector<MemoryEntry<S>> entries_;
};

template <typename S>
struct TokenPrompt {
    Var<S> token;  // 1 x C frame token
};

template <typename S>
struct MemoryPrompt {
    const MemoryBank<S>* bank = nullptr;
};

template <typename S>
using Prompt = std::variant<TokenPrompt<S>, MemoryPrompt<S>>;

template <typename S>
struct EncodedPrompt {
    Var<S> tokens;    // k x C
    Var<S> features;  // n x C, conditioned frame features
};

template <typename S>
struct MaskPrediction {
    Var<S> logits;        // H x W
    Var<S> patch_logits;  // grid_h x grid_w
    Var<S> presence;      // 1 x 1, in [0, 1]

    [[nodiscard]] S presence_value() const { return presence.value()(0, 0); }
};

/// Final per-frame probabilities: sigmoid(logits), zeroed when the presence
/// score is below `threshold`.
template <typename S>
Mat<S> emitted_probabilities(const MaskPrediction<S>& p, double threshold) {
    if (static_cast<double>(p.presence_value()) < threshold) {
        return Mat<S>::Zero(p.logits.rows(), p.logits.cols());
    }
    return (S(1) / (S(1) + (-p.logits.value().array()).exp())).matrix();
}

/// Binary mask from emitted probabilities (> 0.5).
template <typename S>
Mask binarize(const Mat<S>& probs) {
    Mask m(probs.rows(), probs.cols());
    for (Eigen::Index y = 0; y < probs.rows(); ++y) {
        for (Eigen::Index x = 0; x < probs.cols(); ++x) m(y, x) = probs(y, x) > S(0.5) ? 1 : 0;
    }
    return m;
}

/// Prompt encoder, two-way mask decoder with a positionwise hypernetwork
/// head, presence head, and memory encoder.
class MaskGenerator {
public:
    MaskGenerator() = default;

    template <typename S>
    MaskGenerator(ParamInit<S> init, const RunConfig& cfg)
        : channels_(cfg.channels), patch_(cfg.patch), capacity_(cfg.memory_capacity), pixel_skip_(cfg.pixel_skip),
          pos_enc_(cfg.decoder_pos_enc) {
        const int c = cfg.channels;
        const int d = cfg.attn_dim;
        const int n = (cfg.height / cfg.patch) * (cfg.width / cfg.patch);
        auto mem = init.scope("memory");
        memory_attn_ = Attention::create(mem, "attn", c, d);
        memory_query_ = mem.normal("query", 1, c, 1.0);
        memory_fg_ = mem.normal("fg", 1, c, 0.5);
        memory_bg_ = mem.normal("bg", 1, c, 0.5);
        auto dec = init.scope("decoder");
        if (pos_enc_) pos_ = dec.normal("pos", n, c, 0.5);
        token_to_image_ = Attention::create(dec, "t2i", c, d);
        ln1_ = LayerNorm::create(dec, "ln1", c);
        mlp1_ = Linear::create(dec, "mlp1", c, cfg.mlp_ratio * c);
        mlp2_ = Linear::create(dec, "mlp2", cfg.mlp_ratio * c, c, true, 0.5);
        ln2_ = LayerNorm::create(dec, "ln2", c);
        image_to_token_ = Attention::create(dec, "i2t", c, d);
        ln3_ = LayerNorm::create(dec, "ln3", c);
        final_attn_ = Attention::create(dec, "final", c, d);
        ln4_ = LayerNorm::create(dec, "ln4", c);
        hyper_ = Linear::create(dec, "hyper", c, c);
        if (pixel_skip_) pixel_hyper_ = Linear::create(dec, "pixel_hyper", c, cfg.pixel_channels);
        presence_ = Linear::create(dec, "presence", c, 1);
    }

    [[nodiscard]] int capacity() const { return capacity_; }
    [[nodiscard]] const Attention& memory_attention() const { return memory_attn_; }
    [[nodiscard]] std::size_t memory_foreground() const { return memory_fg_; }
    [[nodiscard]] std::size_t memory_background() const { return memory_bg_; }

    template <typename S>
    EncodedPrompt<S> encode_prompt(Graph<S>& g, const Prompt<S>& prompt, Var<S> features) const {
        if (const auto* tp = std::get_if<TokenPrompt<S>>(&prompt)) {
            if (tp->token.rows() != 1 || tp->token.cols() != features.cols()) {
                throw ShapeError("encode_prompt: frame token must be 1 x C");
            }
            return {tp->token, features};
        }
        const MemoryBank<S>* bank = std::get<MemoryPrompt<S>>(prompt).bank;
        if (bank == nullptr || bank->empty()) {
            throw StateError("memory prompt with an empty memory bank; the first segmented frame must be a key frame");
        }
        std::vector<Var<S>> keys, values;
        for (const auto& e : bank->entries()) {
            keys.push_back(e.keys);
            values.push_back(e.values);
        }
        Var<S> k = keys.size() == 1 ? keys.front() : ops::concat_rows(std::span<const Var<S>>(keys));
        Var<S> v = values.size() == 1 ? values.front() : ops::concat_rows(std::span<const Var<S>>(values));
        Var<S> q = memory_attn_.q(g, features);
        Var<S> read = memory_attn_.o(g, scaled_dot_attention(q, k, v));
        return {g.param(memory_query_), ops::add(features, read)};
    }

    /// `pixels` may be invalid when the full-resolution path is disabled.
    template <typename S>
    MaskPrediction<S> decode_mask(Graph<S>& g, Var<S> features, Var<S> pixels, Var<S> tokens, int grid_h,
                                  int grid_w) const {
        if (features.rows() != static_cast<Eigen::Index>(grid_h) * grid_w || features.cols() != channels_) {
            throw ShapeError("decode_mask: features must be (grid_h*grid_w) x C");
        }
        if (tokens.cols() != channels_ || tokens.rows() < 1) throw ShapeError("decode_mask: prompt tokens must be k x C");
        Var<S> pe;
        const Var<S>* pos = nullptr;
        if (pos_enc_) {
            pe = g.param(pos_);
            if (pe.rows() != features.rows()) throw ShapeError("decode_mask: positional table does not fit the grid");
            pos = &pe;
        }
        Var<S> t = ln1_(g, ops::add(tokens, token_to_image_(g, tokens, features, static_cast<const Var<S>*>(nullptr), pos)));
        t = ln2_(g, ops::add(t, mlp2_(g, ops::gelu(mlp1_(g, t)))));
        Var<S> f = ln3_(g, ops::add(features, image_to_token_(g, features, t, pos, static_cast<const Var<S>*>(nullptr))));
        t = ln4_(g, ops::add(t, final_attn_(g, t, f, static_cast<const Var<S>*>(nullptr), pos)));

        Var<S> first = ops::slice_rows(t, 0, 1);
        MaskPrediction<S> out;
        out.patch_logits = ops::reshape(ops::matmul_nt(f, hyper_(g, first)), grid_h, grid_w);
        out.logits = bilinear_upsample(out.patch_logits, patch_);
        if (pixel_skip_) {
            if (!pixels.valid()) throw ShapeError("decode_mask: pixel features missing");
            const Eigen::Index h = static_cast<Eigen::Index>(grid_h) * patch_;
            const Eigen::Index w = static_cast<Eigen::Index>(grid_w) * patch_;
            if (pixels.rows() != h * w) throw ShapeError("decode_mask: pixel features do not match the frame size");
            Var<S> fine = ops::reshape(ops::matmul_nt(pixels, pixel_hyper_(g, first)), h, w);
            out.logits = ops::add(out.logits, fine);
        }
        out.presence = ops::sigmoid(presence_(g, first));
        return out;
    }

    template <typename S>
    MaskPrediction<S> predict(Graph<S>& g, const Prompt<S>& prompt, const FrameFeatures<S>& f) const {
        EncodedPrompt<S> e = encode_prompt(g, prompt, f.patches);
        return decode_mask(g, e.features, f.pixels, e.tokens, f.grid_h, f.grid_w);
    }

    /// Memory encoder: f + m * w_fg + (1 - m) * w_bg with m the mask
    /// average-pooled to the patch grid; keys and values are cached.
    template <typename S>
    MemoryEntry<S> encode_memory(Graph<S>& g, int frame, Var<S> features, Var<S> mask, bool is_key, int grid_h,
                                 int grid_w) const {
        if (mask.rows() != static_cast<Eigen::Index>(grid_h) * patch_ ||
            mask.cols() != static_cast<Eigen::Index>(grid_w) * patch_) {
            throw ShapeError("memory_write: mask does not match the frame size");
        }
        const Mat<S> pool_r = average_pool_matrix<S>(mask.rows(), patch_);
        const Mat<S> pool_c = average_pool_matrix<S>(mask.cols(), patch_);
        Var<S> down = ops::matmul_nt(ops::left_apply(pool_r, mask), g.constant(pool_c));
        Var<S> m = ops::reshape(down, static_cast<Eigen::Index>(grid_h) * grid_w, 1);
        Var<S> inv = ops::add_const(ops::scale(m, S(-1)), Mat<S>(Mat<S>::Ones(m.rows(), 1)));
        Var<S> mixed = ops::add(features, ops::add(ops::matmul(m, g.param(memory_fg_)), ops::matmul(inv, g.param(memory_bg_))));
        MemoryEntry<S> e;
        e.frame = frame;
        e.is_key = is_key;
        e.features = mixed;
        e.keys = memory_attn_.k(g, mixed);
        e.values = memory_attn_.v(g, mixed);
        return e;
    }

    template <typename S>
    std::optional<int> memory_write(Graph<S>& g, MemoryBank<S>& bank, int frame, Var<S> features, Var<S> mask,
                                    bool is_key, int grid_h, int grid_w) const {
        if (bank.contains(frame)) throw StateError("memory bank already holds frame " + std::to_string(frame));
        return bank.write(encode_memory(g, frame, features, mask, is_key, grid_h, grid_w));
    }

    /// Mask written to memory for a prediction: p_hat * sigmoid(logits).
    template <typename S>
    static Var<S> memory_mask(const MaskPrediction<S>& p) {
        return ops::scale_by(ops::sigmoid(p.logits), p.presence);
    }

    /// Segments every frame of a video. Key frames are prompted by their
    /// frame tokens, the rest by memory; processing starts at the earliest
    /// key frame and runs forward, then backward from it with a fresh bank.
    template <typename S>
    std::vector<MaskPrediction<S>> segment_video(Graph<S>& g, std::span<const FrameFeatures<S>> frames,
                                                 const std::map<int, Var<S>>& frame_tokens) const {
        const int count = static_cast<int>(frames.size());
        if (frame_tokens.empty()) throw InputError("segment_video: no key frames");
        for (const auto& [t, tok] : frame_tokens) {
            if (t < 0 || t >= count) throw InputError("segment_video: key frame index out of range");
        }
        std::vector<std::optional<MaskPrediction<S>>> out(static_cast<std::size_t>(count));
        const int first = frame_tokens.begin()->first;
        auto step = [&](MemoryBank<S>& bank, int t) {
            const FrameFeatures<S>& f = frames[static_cast<std::size_t>(t)];
            auto it = frame_tokens.find(t);
            const bool key = it != frame_tokens.end();
            Prompt<S> prompt = key ? Prompt<S>(TokenPrompt<S>{it->second}) : Prompt<S>(MemoryPrompt<S>{&bank});
            MaskPrediction<S> p = predict(g, prompt, f);
            memory_write(g, bank, t, f.patches, memory_mask(p), key, f.grid_h, f.grid_w);
            out[static_cast<std::size_t>(t)] = p;
        };
        MemoryBank<S> forward(capacity_);
        for (int t = first; t < count; ++t) step(forward, t);
        if (first > 0) {
            MemoryBank<S> backward(capacity_);
            const FrameFeatures<S>& f0 = frames[static_cast<std::size_t>(first)];
            memory_write(g, backward, first, f0.patches, memory_mask(*out[static_cast<std::size_t>(first)]), true,
                         f0.grid_h, f0.grid_w);
            for (int t = first - 1; t >= 0; --t) step(backward, t);
        }
        std::vector<MaskPrediction<S>> result;
        result.reserve(out.size());
        for (auto& p : out) result.push_back(*p);
        return result;
    }

private:
    int channels_ = 64;
    int patch_ = 8;
    int capacity_ = 6;
    bool pixel_skip_ = true;
    bool pos_enc_ = true;
    Attention memory_attn_;
    std::size_t memory_query_ = 0;
    std::size_t memory_fg_ = 0;
    std::size_t memory_bg_ = 0;
    std::size_t pos_ = 0;
    Attention token_to_image_;
    LayerNorm ln1_;
    Linear mlp1_, mlp2_;
    LayerNorm ln2_;
    Attention image_to_token_;
    LayerNorm ln3_;
    Attention final_attn_;
    LayerNorm ln4_;
    Linear hyper_;
    Linear pixel_hyper_;
    Linear presence_;
};

}  // namespace trajseg

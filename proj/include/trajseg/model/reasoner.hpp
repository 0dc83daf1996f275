#pragma once

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "trajseg/model/trajectory_encoder.hpp"

namespace trajseg {

template <typename S>
struct ReasonerOutput {
    Var<S> logits;        // L x V, one row per sequence position
    Var<S> hidden;        // L x C, final-layer states after the output norm
    int response_offset = 0;  // sequence position of the first response token
    int visual_tokens = 0;
};

/// Upper-triangular -inf mask for causal self-attention.
template <typename S>
Mat<S> causal_mask(Eigen::Index n) {
    Mat<S> m = Mat<S>::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) m(i, j) = -std::numeric_limits<S>::infinity();
    }
    return m;
}

/// Tiny decoder-only transformer over [visual tokens ; <bos> instruction response].
/// Pre-norm blocks, learned positions, untied output head.
class Reasoner {
public:
    struct Block {
        LayerNorm ln1, ln2;
        Linear q, k, v, o;
        Linear mlp1, mlp2;
    };

    Reasoner() = default;

    template <typename S>
    Reasoner(ParamInit<S> init, const RunConfig& cfg, int vocab_size)
        : channels_(cfg.channels), heads_(cfg.heads), max_len_(cfg.max_len), vocab_size_(vocab_size) {
        const int c = cfg.channels;
        token_embedding_ = init.normal("tok", vocab_size, c, 1.0);
        position_embedding_ = init.normal("pos", cfg.max_len, c, 0.1);
        visual_ = Linear::create(init, "visual", c, c);
        for (int l = 0; l < cfg.layers; ++l) {
            auto s = init.scope("layer" + std::to_string(l));
            Block b;
            b.ln1 = LayerNorm::create(s, "ln1", c);
            b.q = Linear::create(s, "q", c, c);
            b.k = Linear::create(s, "k", c, c);
            b.v = Linear::create(s, "v", c, c);
            b.o = Linear::create(s, "o", c, c, true, 0.5);
            b.ln2 = LayerNorm::create(s, "ln2", c);
            b.mlp1 = Linear::create(s, "mlp1", c, cfg.mlp_ratio * c);
            b.mlp2 = Linear::create(s, "mlp2", cfg.mlp_ratio * c, c, true, 0.5);
            blocks_.push_back(b);
        }
        final_norm_ = LayerNorm::create(init, "ln_f", c);
        head_ = Linear::create(init, "head", c, vocab_size);
        trj_ = Linear::create(init, "trj", c, c);
    }

    [[nodiscard]] std::size_t token_embedding() const { return token_embedding_; }
    [[nodiscard]] const Linear& head() const { return head_; }
    [[nodiscard]] const Linear& trj_projection() const { return trj_; }
    [[nodiscard]] int max_len() const { return max_len_; }

    /// `text` is [<bos>, instruction..., response...] without the final <eos>.
    /// `slot` replaces the embedding of the single placeholder token when given.
    template <typename S>
    ReasonerOutput<S> forward(Graph<S>& g, const Var<S>* visual, std::span<const int> text,
                              const Var<S>* slot = nullptr) const {
        const int k = visual != nullptr ? static_cast<int>(visual->rows()) : 0;
        const int length = k + static_cast<int>(text.size());
        if (length > max_len_) {
            throw CapacityError("reasoner: sequence length " + std::to_string(length) + " exceeds max_len " +
                                std::to_string(max_len_));
        }
        if (text.empty()) throw InputError("reasoner: empty text sequence");
        Var<S> table = g.param(token_embedding_);
        Var<S> text_emb;
        if (slot != nullptr) {
            text_emb = insert_placeholder(text, table, *slot);
        } else {
            for (int id : text) {
                if (id == Vocabulary::kPlaceholder) throw InputError("reasoner: placeholder without trajectory feature");
            }
            text_emb = ops::gather_rows(table, text);
        }
        Var<S> x = text_emb;
        if (k > 0) {
            std::vector<Var<S>> parts = {visual_(g, *visual), text_emb};
            x = ops::concat_rows(std::span<const Var<S>>(parts));
        }
        x = ops::add(x, ops::slice_rows(g.param(position_embedding_), 0, length));

        const Mat<S> mask = causal_mask<S>(length);
        const int head_dim = channels_ / heads_;
        for (const Block& b : blocks_) {
            Var<S> h = b.ln1(g, x);
            Var<S> q = b.q(g, h);
            Var<S> kk = b.k(g, h);
            Var<S> v = b.v(g, h);
            std::vector<Var<S>> outs;
            for (int hd = 0; hd < heads_; ++hd) {
                outs.push_back(masked_attention(ops::slice_cols(q, hd * head_dim, head_dim),
                                                ops::slice_cols(kk, hd * head_dim, head_dim),
                                                ops::slice_cols(v, hd * head_dim, head_dim), mask));
            }
            Var<S> attn = heads_ == 1 ? outs.front() : ops::concat_cols(std::span<const Var<S>>(outs));
            x = ops::add(x, b.o(g, attn));
            x = ops::add(x, b.mlp2(g, ops::gelu(b.mlp1(g, b.ln2(g, x)))));
        }
        ReasonerOutput<S> out;
        out.hidden = final_norm_(g, x);
        out.logits = head_(g, out.hidden);
        out.visual_tokens = k;
        return out;
    }

    /// Teacher-forced pass: text = [<bos>] + input + target. Returns the output
    /// with response_offset set to the position of target[0].
    template <typename S>
    ReasonerOutput<S> teacher_forced(Graph<S>& g, const Var<S>* visual, std::span<const int> input,
                                     std::span<const int> target, const Var<S>* slot = nullptr) const {
        std::vector<int> text;
        text.reserve(1 + input.size() + target.size());
        text.push_back(Vocabulary::kBos);
        text.insert(text.end(), input.begin(), input.end());
        text.insert(text.end(), target.begin(), target.end());
        ReasonerOutput<S> out = forward(g, visual, text, slot);
        out.response_offset = out.visual_tokens + 1 + static_cast<int>(input.size());
        return out;
    }

    /// Mean cross-entropy of target + <eos> under teacher forcing.
    template <typename S>
    Var<S> text_loss(const ReasonerOutput<S>& out, std::span<const int> target) const {
        std::vector<int> labels(target.begin(), target.end());
        labels.push_back(Vocabulary::kEos);
        Var<S> rows = ops::slice_rows(out.logits, out.response_offset - 1, static_cast<Eigen::Index>(labels.size()));
        return ops::cross_entropy(rows, std::span<const int>(labels));
    }

    /// x_traj: the final hidden state where <TRJ> sits in the response,
    /// projected to C. <TRJ> must occur exactly once.
    template <typename S>
    Var<S> extract_trj(Graph<S>& g, const ReasonerOutput<S>& out, std::span<const int> target) const {
        int found = -1;
        for (std::size_t i = 0; i < target.size(); ++i) {
            if (target[i] != Vocabulary::kTrj) continue;
            if (found >= 0) throw InputError("response contains more than one <TRJ> token");
            found = static_cast<int>(i);
        }
        if (found < 0) throw InputError("response contains no <TRJ> token");
        return trj_(g, ops::slice_rows(out.hidden, out.response_offset + found, 1));
    }

    /// Greedy decoding until <eos> or the length limit. Returns the response
    /// ids (without <eos>).
    template <typename S>
    std::vector<int> generate(const ParamStore<S>& params, const Mat<S>* visual, std::span<const int> input,
                              const Mat<S>* slot, int max_new = 24) const {
        std::vector<int> response;
        for (int step = 0; step < max_new; ++step) {
            Tape<S> tape;
            Graph<S> g(tape, params);
            Var<S> vis;
            Var<S> sl;
            if (visual != nullptr) vis = g.constant(*visual);
            if (slot != nullptr) sl = g.constant(*slot);
            const int k = visual != nullptr ? static_cast<int>(visual->rows()) : 0;
            if (k + 1 + static_cast<int>(input.size() + response.size()) >= max_len_) break;
            ReasonerOutput<S> out =
                teacher_forced(g, visual != nullptr ? &vis : nullptr, input, response, slot != nullptr ? &sl : nullptr);
            Eigen::Index best = 0;
            out.logits.value().row(out.logits.rows() - 1).maxCoeff(&best);
            if (static_cast<int>(best) == Vocabulary::kEos) break;
            response.push_back(static_cast<int>(best));
        }
        return response;
    }

private:
    int channels_ = 64;
    int heads_ = 2;
    int max_len_ = 128;
    int vocab_size_ = 0;
    std::size_t token_embedding_ = 0;
    std::size_t position_embedding_ = 0;
    Linear visual_;
    std::vector<Block> blocks_;
    LayerNorm final_norm_;
    Linear head_;
    Linear trj_;
};

}  // namespace trajseg

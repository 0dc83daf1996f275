#pragma once

#include <optional>
#include <span>
#include <vector>

#include "trajseg/io/config.hpp"
#include "trajseg/numerics/kernels.hpp"

namespace trajseg {

struct LossWeights {
    double text = 1.0;
    double mask = 1.0;
    double cls = 0.5;
    double bce = 2.0;
    double dice = 0.5;

    void validate() const {
        if (text < 0 || mask < 0 || cls < 0 || bce < 0 || dice < 0) throw ConfigError("loss weights must be nonnegative");
    }

    static LossWeights from(const RunConfig& c) {
        return {c.lambda_text, c.lambda_mask, c.lambda_cls, c.lambda_bce, c.lambda_dice};
    }
};

/// Total loss and its unweighted terms.
template <typename S>
struct LossTerms {
    Var<S> total;
    S text = 0;
    S mask = 0;
    S cls = 0;
};

/// lambda_bce * BCE + lambda_dice * DICE of one frame's probabilities.
template <typename S>
Var<S> mask_term(Var<S> probs, const Mat<S>& gt, const LossWeights& w) {
    return ops::add(ops::scale(bce_loss(probs, gt), static_cast<S>(w.bce)),
                    ops::scale(dice_loss(probs, gt), static_cast<S>(w.dice)));
}

namespace detail {

template <typename S>
Var<S> sum_all(std::span<const Var<S>> parts) {
    Var<S> s = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) s = ops::add(s, parts[i]);
    return s;
}

template <typename S>
Var<S> zero_like(Tape<S>* tape) {
    return tape->constant(Mat<S>::Zero(1, 1));
}

}  // namespace detail

/// Pre-training objective: lambda_text * CE + lambda_mask * mean over frames
/// of the mask term. `text_ce` is absent when no text is supervised.
template <typename S>
LossTerms<S> stage1_loss(std::optional<Var<S>> text_ce, std::span<const Var<S>> probs, std::span<const Mat<S>> gts,
                         const LossWeights& w) {
    w.validate();
    if (probs.size() != gts.size()) throw ShapeError("stage1_loss: prediction and ground-truth counts differ");
    if (probs.empty() && !text_ce) throw InputError("stage1_loss: nothing to supervise");
    Tape<S>* tape = text_ce ? text_ce->tape : probs.front().tape;
    LossTerms<S> out;
    std::vector<Var<S>> parts;
    if (text_ce) {
        out.text = text_ce->value()(0, 0);
        parts.push_back(ops::scale(*text_ce, static_cast<S>(w.text)));
    }
    if (!probs.empty()) {
        std::vector<Var<S>> frames;
        for (std::size_t t = 0; t < probs.size(); ++t) frames.push_back(mask_term(probs[t], gts[t], w));
        Var<S> mean = ops::scale(detail::sum_all<S>(frames), S(1) / static_cast<S>(frames.size()));
        out.mask = mean.value()(0, 0);
        parts.push_back(ops::scale(mean, static_cast<S>(w.mask)));
    }
    out.total = parts.empty() ? detail::zero_like(tape) : detail::sum_all<S>(parts);
    return out;
}

/// Main-training objective: text CE, the mask term averaged over frames where
/// the target is present (absent frames do not enter the graph at all), and
/// BCE between presence scores and flags over all frames.
template <typename S>
LossTerms<S> stage2_loss(std::optional<Var<S>> text_ce, std::span<const Var<S>> presence,
                         std::span<const int> present, std::span<const Var<S>> probs, std::span<const Mat<S>> gts,
                         const LossWeights& w) {
    w.validate();
    if (presence.size() != present.size() || probs.size() != present.size() || gts.size() != present.size()) {
        throw ShapeError("stage2_loss: presence length differs from frame count");
    }
    if (present.empty()) throw InputError("stage2_loss: no frames");
    LossTerms<S> out;
    std::vector<Var<S>> parts;
    if (text_ce) {
        out.text = text_ce->value()(0, 0);
        parts.push_back(ops::scale(*text_ce, static_cast<S>(w.text)));
    }
    std::vector<Var<S>> frames;
    for (std::size_t t = 0; t < probs.size(); ++t) {
        if (present[t] != 0) frames.push_back(mask_term(probs[t], gts[t], w));
    }
    if (!frames.empty()) {
        Var<S> mean = ops::scale(detail::sum_all<S>(frames), S(1) / static_cast<S>(frames.size()));
        out.mask = mean.value()(0, 0);
        parts.push_back(ops::scale(mean, static_cast<S>(w.mask)));
    }
    Mat<S> flags(1, static_cast<Eigen::Index>(present.size()));
    for (std::size_t t = 0; t < present.size(); ++t) flags(0, static_cast<Eigen::Index>(t)) = present[t] != 0 ? S(1) : S(0);
    Var<S> cls = bce_loss(ops::concat_cols(presence), flags);
    out.cls = cls.value()(0, 0);
    parts.push_back(ops::scale(cls, static_cast<S>(w.cls)));
    out.total = detail::sum_all<S>(parts);
    return out;
}

}  // namespace trajseg

#include "trajseg/numerics/grad_suite.hpp"

#include <cstdio>
#include <functional>
#include <map>
#include <random>

#include "trajseg/model/trajseg_model.hpp"
#include "trajseg/training/losses.hpp"

namespace trajseg {

namespace {

using GraphFn = std::function<Var<double>(Graph<double>&, const std::vector<Var<double>>&)>;

Mat<double> uniform(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double lo = -1, double hi = 1) {
    std::uniform_real_distribution<double> u(lo, hi);
    Mat<double> m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = u(rng);
    return m;
}

Mat<double> binary(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
    std::bernoulli_distribution b(0.5);
    Mat<double> m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = b(rng) ? 1.0 : 0.0;
    return m;
}

Box random_box(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 0.75);
    const double x0 = u(rng), y0 = u(rng);
    std::uniform_real_distribution<double> wx(0.15, 1.0 - x0), wy(0.15, 1.0 - y0);
    return Box{x0, y0, x0 + wx(rng), y0 + wy(rng)};
}

// Projects a matrix output to a scalar with fixed random weights so every
// entry of the output reaches the gradient.
Var<double> weighted(Graph<double>& g, Var<double> x, std::uint64_t salt) {
    std::mt19937_64 rng(0xC0FFEEull + salt * 7919 + static_cast<std::uint64_t>(x.rows() * 131 + x.cols()));
    return ops::sum(ops::hadamard(x, g.constant(uniform(x.rows(), x.cols(), rng))));
}

constexpr int kC = 16;  // channels of the tiny config

// Tiny model shapes: every weight is probed, graphs stay a few hundred nodes.
RunConfig tiny_config() {
    RunConfig c;
    c.channels = kC;
    c.attn_dim = 4;
    c.patch = 2;
    c.height = 4;
    c.width = 4;
    c.pixel_channels = 2;
    c.layers = 1;
    c.heads = 2;
    c.mlp_ratio = 2;
    c.max_len = 16;
    c.traj_slots = 2;
    c.roi_size = 2;
    c.memory_capacity = 2;
    c.frames = 3;
    c.key_frames = 1;
    return c;
}

// Initialized weights plus noise, so gains and biases are not at their
// special starting values.
void jitter(ParamStore<double>& store, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 0.2);
    for (auto& p : store) {
        for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value(i) += n(rng);
    }
}

/// Checks gradients w.r.t. explicit inputs (every entry) and the weights in
/// `store` (a random subset of entries per tensor).
GradCheckReport check(const std::string& op, const std::vector<std::string>& names, const std::vector<Mat<double>>& point,
                      ParamStore<double>& store, const GraphFn& fn, std::mt19937_64& rng, const GradSuiteOptions& opt) {
    auto evaluate = [&](const std::vector<Mat<double>>& xs) {
        Tape<double> tape;
        Graph<double> g(tape, store);
        std::vector<Var<double>> vars;
        for (const auto& x : xs) vars.push_back(tape.variable(x));
        const double v = fn(g, vars).value()(0, 0);
        if (!std::isfinite(v)) throw NumericError(op + ": non-finite function value");
        return v;
    };
    Tape<double> tape;
    Graph<double> g(tape, store);
    std::vector<Var<double>> vars;
    for (const auto& x : point) vars.push_back(tape.variable(x));
    const Var<double> loss = fn(g, vars);
    if (loss.rows() != 1 || loss.cols() != 1) throw ShapeError(op + ": loss must be 1x1");
    Gradients<double> grads;
    tape.backward(loss, &grads);

    const double eps = opt.check.epsilon;
    GradCheckReport report;
    report.operation = op;
    report.tolerance = opt.check.tolerance;
    std::vector<Mat<double>> probe = point;
    for (std::size_t k = 0; k < point.size(); ++k) {
        const Mat<double> analytic = tape.grad(vars[k]) * opt.check.analytic_scale;
        Mat<double> numeric(analytic.rows(), analytic.cols());
        for (Eigen::Index i = 0; i < point[k].size(); ++i) {
            const double x0 = point[k](i);
            probe[k](i) = x0 + eps;
            const double fp = evaluate(probe);
            probe[k](i) = x0 - eps;
            const double fm = evaluate(probe);
            probe[k](i) = x0;
            numeric(i) = (fp - fm) / (2 * eps);
        }
        report.input_names.push_back(names[k]);
        report.max_relative_error.push_back(relative_error(analytic, numeric, opt.check.floor));
    }
    for (std::size_t p = 0; p < store.size(); ++p) {
        Mat<double>& w = store[p].value;
        const Mat<double> analytic = grads.get(store, p) * opt.check.analytic_scale;
        std::uniform_int_distribution<Eigen::Index> pick(0, w.size() - 1);
        const int probes = std::min<int>(opt.entries_per_param, static_cast<int>(w.size()));
        Vec<double> a(probes), n(probes);
        for (int s = 0; s < probes; ++s) {
            const Eigen::Index i = probes == w.size() ? s : pick(rng);
            const double x0 = w(i);
            w(i) = x0 + eps;
            const double fp = evaluate(point);
            w(i) = x0 - eps;
            const double fm = evaluate(point);
            w(i) = x0;
            a(s) = analytic(i);
            n(s) = (fp - fm) / (2 * eps);
        }
        // probed entries are compared on the scale of the whole tensor's gradient
        const double scale = std::max(analytic.cwiseAbs().maxCoeff(), n.cwiseAbs().maxCoeff());
        report.input_names.push_back(store[p].name);
        report.max_relative_error.push_back((a - n).cwiseAbs().maxCoeff() / std::max(scale, opt.check.floor));
    }
    report.passed = report.worst() <= opt.check.tolerance;
    return report;
}

/// Keeps the worst error per input over repeated points.
void merge(GradCheckReport& into, const GradCheckReport& r) {
    if (into.input_names.empty()) {
        into = r;
        return;
    }
    for (std::size_t i = 0; i < r.max_relative_error.size() && i < into.max_relative_error.size(); ++i) {
        into.max_relative_error[i] = std::max(into.max_relative_error[i], r.max_relative_error[i]);
    }
    into.passed = into.passed && r.passed;
}

struct Case {
    std::string name;
    // Builds one random instance: names, point, weights (may stay empty), loss.
    std::function<void(std::mt19937_64&, std::vector<std::string>&, std::vector<Mat<double>>&, ParamStore<double>&,
                       GraphFn&)>
        make;
};

std::vector<Case> numerics_cases() {
    std::vector<Case> cases;
    cases.push_back({"scaled_dot_attention", [](auto& rng, auto& names, auto& pt, auto&, GraphFn& fn) {
                         names = {"q", "k", "v"};
                         pt = {uniform(2, 3, rng), uniform(4, 3, rng), uniform(4, 2, rng)};
                         fn = [](Graph<double>& g, const std::vector<Var<double>>& x) {
                             return weighted(g, scaled_dot_attention(x[0], x[1], x[2]), 1);
                         };
                     }});
    cases.push_back({"roi_align", [](auto& rng, auto& names, auto& pt, auto&, GraphFn& fn) {
                         names = {"feature"};
                         pt = {uniform(16, 2, rng)};
                         const Box box = random_box(rng);
                         fn = [box](Graph<double>& g, const std::vector<Var<double>>& x) {
                             return weighted(g, roi_align(x[0], 4, 4, box, 2), 2);
                         };
                     }});
    cases.push_back({"dice_loss", [](auto& rng, auto& names, auto& pt, auto&, GraphFn& fn) {
                         names = {"pred"};
                         pt = {uniform(3, 3, rng, 0.2, 0.8)};
                         const Mat<double> gt = binary(3, 3, rng);
                         fn = [gt](Graph<double>&, const std::vector<Var<double>>& x) { return dice_loss(x[0], gt); };
                     }});
    cases.push_back({"bce_loss", [](auto& rng, auto& names, auto& pt, auto&, GraphFn& fn) {
                         names = {"pred"};
                         pt = {uniform(3, 3, rng, 0.2, 0.8)};
                         const Mat<double> gt = binary(3, 3, rng);
                         fn = [gt](Graph<double>&, const std::vector<Var<double>>& x) { return bce_loss(x[0], gt); };
                     }});
    cases.push_back({"matmul", [](auto& rng, auto& names, auto& pt, auto&, GraphFn& fn) {
                         names = {"a", "b"};
                         pt = {uniform(2, 3, rng), uniform(3, 4, rng)};
                         fn = [](Graph<double>& g, const std::vector<Var<double>>& x) {
                             return weighted(g, ops::add(ops::matmul(x[0], x[1]), ops::matmul_nt(x[0], ops::transpose(x[1]))), 3);
                         };
                     }});
    cases.push_back({"softmax_rows", [](auto& rng, auto& names, auto& pt, auto&, GraphFn& fn) {
                         names = {"a"};
                         pt = {uniform(3, 4, rng, -2, 2)};
                         fn = [](Graph<double>& g, const std::vector<Var<double>>& x) {
                             return weighted(g, ops::softmax_rows(x[0]), 4);
                         };
                     }});
    cases.push_back({"layer_norm_rows", [](auto& rng, auto& names, auto& pt, auto&, GraphFn& fn) {
                         names = {"a", "gain", "bias"};
                         pt = {uniform(3, 4, rng, -2, 2), uniform(1, 4, rng), uniform(1, 4, rng)};
                         fn = [](Graph<double>& g, const std::vector<Var<double>>& x) {
                             return weighted(g, ops::layer_norm_rows(x[0], x[1], x[2]), 5);
                         };
                     }});
    cases.push_back({"activations", [](auto& rng, auto& names, auto& pt, auto&, GraphFn& fn) {
                         names = {"a"};
                         pt = {uniform(3, 4, rng, -3, 3)};
                         fn = [](Graph<double>& g, const std::vector<Var<double>>& x) {
                             Var<double> y = ops::add(ops::gelu(x[0]), ops::sigmoid(x[0]));
                             return weighted(g, ops::add(y, ops::tanh(x[0])), 6);
                         };
                     }});
    cases.push_back({"cross_entropy", [](auto& rng, auto& names, auto& pt, auto&, GraphFn& fn) {
                         names = {"logits"};
                         pt = {uniform(3, 5, rng, -2, 2)};
                         std::uniform_int_distribution<int> label(0, 4);
                         std::vector<int> y = {label(rng), label(rng), label(rng)};
                         fn = [y](Graph<double>&, const std::vector<Var<double>>& x) {
                             return ops::cross_entropy(x[0], std::span<const int>(y));
                         };
                     }});
    cases.push_back({"bilinear_upsample", [](auto& rng, auto& names, auto& pt, auto&, GraphFn& fn) {
                         names = {"x"};
                         pt = {uniform(2, 3, rng)};
                         fn = [](Graph<double>& g, const std::vector<Var<double>>& x) {
                             return weighted(g, bilinear_upsample(x[0], 2), 7);
                         };
                     }});
    cases.push_back({"reshape_slice_concat", [](auto& rng, auto& names, auto& pt, auto&, GraphFn& fn) {
                         names = {"a", "row"};
                         pt = {uniform(4, 3, rng), uniform(1, 3, rng)};
                         fn = [](Graph<double>& g, const std::vector<Var<double>>& x) {
                             Var<double> s = ops::set_row(x[0], 1, x[1]);
                             std::vector<Var<double>> parts = {ops::slice_rows(s, 0, 2), ops::slice_cols(s, 1, 2)};
                             Var<double> r = ops::reshape(ops::concat_rows(std::span<const Var<double>>({ops::mean_rows(s), x[1]})), 3, 2);
                             return ops::add(ops::add(weighted(g, parts[0], 8), weighted(g, parts[1], 9)), weighted(g, r, 10));
                         };
                     }});
    return cases;
}

std::vector<FrameFeatures<double>> features_of(const std::vector<Var<double>>& x, std::size_t first, int frames,
                                               bool pixels) {
    std::vector<FrameFeatures<double>> out;
    for (int t = 0; t < frames; ++t) {
        FrameFeatures<double> f;
        f.patches = x[first + static_cast<std::size_t>(t) * (pixels ? 2 : 1)];
        if (pixels) f.pixels = x[first + static_cast<std::size_t>(t) * 2 + 1];
        f.grid_h = 2;
        f.grid_w = 2;
        f.patch = 2;
        out.push_back(f);
    }
    return out;
}

std::vector<Case> trajectory_cases() {
    std::vector<Case> cases;
    cases.push_back({"encode_trajectory", [](auto& rng, auto& names, auto& pt, auto& store, GraphFn& fn) {
                         const RunConfig cfg = tiny_config();
                         ParamInit<double> init(store, rng, "");
                         const TrajectoryEncoder enc(init.scope("trajectory"), cfg);
                         jitter(store, rng);
                         ObjectTrajectory traj;
                         // three present frames, one absent: exercises subsampling to two slots
                         traj.boxes = {random_box(rng), std::nullopt, random_box(rng), random_box(rng)};
                         for (int t = 0; t < 4; ++t) {
                             names.push_back("f" + std::to_string(t));
                             pt.push_back(uniform(4, cfg.channels, rng));
                         }
                         fn = [enc, traj](Graph<double>& g, const std::vector<Var<double>>& x) {
                             const auto feats = features_of(x, 0, 4, false);
                             Var<double> f = enc.encode(g, std::span<const FrameFeatures<double>>(feats), traj);
                             return weighted(g, enc.project(g, f), 11);
                         };
                     }});
    cases.push_back({"insert_placeholder", [](auto& rng, auto& names, auto& pt, auto&, GraphFn& fn) {
                         names = {"table", "slot"};
                         pt = {uniform(6, 4, rng), uniform(1, 4, rng)};
                         fn = [](Graph<double>& g, const std::vector<Var<double>>& x) {
                             const std::vector<int> ids = {1, 5, Vocabulary::kPlaceholder, 5, 2};
                             return weighted(g, insert_placeholder(std::span<const int>(ids), x[0], x[1]), 12);
                         };
                     }});
    return cases;
}

std::vector<Case> reasoner_cases() {
    std::vector<Case> cases;
    cases.push_back({"reasoner_text_and_trj", [](auto& rng, auto& names, auto& pt, auto& store, GraphFn& fn) {
                         const RunConfig cfg = tiny_config();
                         ParamInit<double> init(store, rng, "");
                         const Reasoner r(init.scope("reasoner"), cfg, 8);
                         jitter(store, rng);
                         names = {"visual"};
                         pt = {uniform(2, cfg.channels, rng)};
                         fn = [r](Graph<double>& g, const std::vector<Var<double>>& x) {
                             const std::vector<int> input = {5, 6, 7};
                             const std::vector<int> target = {6, Vocabulary::kTrj};
                             ReasonerOutput<double> out = r.teacher_forced(g, &x[0], input, target);
                             return ops::add(r.text_loss(out, target), weighted(g, r.extract_trj(g, out, target), 13));
                         };
                     }});
    cases.push_back({"reasoner_placeholder", [](auto& rng, auto& names, auto& pt, auto& store, GraphFn& fn) {
                         const RunConfig cfg = tiny_config();
                         ParamInit<double> init(store, rng, "");
                         const Reasoner r(init.scope("reasoner"), cfg, 8);
                         jitter(store, rng);
                         names = {"visual", "slot"};
                         pt = {uniform(1, cfg.channels, rng), uniform(1, cfg.channels, rng)};
                         fn = [r](Graph<double>& g, const std::vector<Var<double>>& x) {
                             const std::vector<int> input = {5, Vocabulary::kPlaceholder, 7};
                             const std::vector<int> target = {6, Vocabulary::kTrj};
                             ReasonerOutput<double> out = r.teacher_forced(g, &x[0], input, target, &x[1]);
                             return r.text_loss(out, target);
                         };
                     }});
    return cases;
}

std::vector<Case> fci_cases() {
    std::vector<Case> cases;
    cases.push_back({"fci_expand", [](auto& rng, auto& names, auto& pt, auto&, GraphFn& fn) {
                         names = {"x_traj", "frame", "wq", "wk", "wv", "wo"};
                         pt = {uniform(1, 4, rng), uniform(5, 4, rng), uniform(4, 3, rng),
                               uniform(4, 3, rng), uniform(4, 3, rng), uniform(3, 4, rng)};
                         fn = [](Graph<double>& g, const std::vector<Var<double>>& x) {
                             return weighted(g, fci_frame(x[0], x[1], x[2], x[3], x[4], x[5]), 14);
                         };
                     }});
    cases.push_back({"fci_module", [](auto& rng, auto& names, auto& pt, auto& store, GraphFn& fn) {
                         const RunConfig cfg = tiny_config();
                         ParamInit<double> init(store, rng, "");
                         const FrameContentIntegration fci(init.scope("fci"), cfg);
                         jitter(store, rng);
                         names = {"x_traj", "f0", "f1"};
                         pt = {uniform(1, kC, rng), uniform(4, kC, rng), uniform(4, kC, rng)};
                         fn = [fci](Graph<double>& g, const std::vector<Var<double>>& x) {
                             std::vector<Var<double>> frames = {x[1], x[2]};
                             auto out = fci.expand(g, x[0], std::span<const Var<double>>(frames));
                             return ops::add(weighted(g, out[0], 15), weighted(g, out[1], 16));
                         };
                     }});
    return cases;
}

std::vector<Case> mask_cases() {
    std::vector<Case> cases;
    auto generator = [](std::mt19937_64& rng, ParamStore<double>& store) {
        const RunConfig cfg = tiny_config();
        ParamInit<double> init(store, rng, "");
        MaskGenerator mg(init.scope("mask"), cfg);
        jitter(store, rng);
        return mg;
    };
    cases.push_back({"decode_mask", [generator](auto& rng, auto& names, auto& pt, auto& store, GraphFn& fn) {
                         const MaskGenerator mg = generator(rng, store);
                         names = {"features", "pixels", "tokens"};
                         pt = {uniform(4, kC, rng), uniform(16, 2, rng), uniform(1, kC, rng)};
                         fn = [mg](Graph<double>& g, const std::vector<Var<double>>& x) {
                             MaskPrediction<double> p = mg.decode_mask(g, x[0], x[1], x[2], 2, 2);
                             return ops::add(weighted(g, p.logits, 17), p.presence);
                         };
                     }});
    cases.push_back({"memory_prompt", [generator](auto& rng, auto& names, auto& pt, auto& store, GraphFn& fn) {
                         const MaskGenerator mg = generator(rng, store);
                         names = {"features", "mem0", "mask0", "mem1", "mask1"};
                         pt = {uniform(4, kC, rng), uniform(4, kC, rng), uniform(4, 4, rng, 0.2, 0.8),
                               uniform(4, kC, rng), uniform(4, 4, rng, 0.2, 0.8)};
                         fn = [mg](Graph<double>& g, const std::vector<Var<double>>& x) {
                             MemoryBank<double> bank(2);
                             mg.memory_write(g, bank, 0, x[1], x[2], true, 2, 2);
                             mg.memory_write(g, bank, 1, x[3], x[4], false, 2, 2);
                             EncodedPrompt<double> e = mg.encode_prompt(g, Prompt<double>(MemoryPrompt<double>{&bank}), x[0]);
                             return ops::add(weighted(g, e.features, 18), weighted(g, e.tokens, 19));
                         };
                     }});
    cases.push_back({"memory_write", [generator](auto& rng, auto& names, auto& pt, auto& store, GraphFn& fn) {
                         const MaskGenerator mg = generator(rng, store);
                         names = {"features", "mask"};
                         pt = {uniform(4, kC, rng), uniform(4, 4, rng, 0.2, 0.8)};
                         fn = [mg](Graph<double>& g, const std::vector<Var<double>>& x) {
                             MemoryEntry<double> e = mg.encode_memory(g, 0, x[0], x[1], false, 2, 2);
                             return ops::add(weighted(g, e.keys, 20), weighted(g, e.values, 21));
                         };
                     }});
    cases.push_back({"segment_video", [generator](auto& rng, auto& names, auto& pt, auto& store, GraphFn& fn) {
                         const MaskGenerator mg = generator(rng, store);
                         for (int t = 0; t < 3; ++t) {
                             names.push_back("patches" + std::to_string(t));
                             pt.push_back(uniform(4, kC, rng, -0.5, 0.5));
                             names.push_back("pixels" + std::to_string(t));
                             pt.push_back(uniform(16, 2, rng));
                         }
                         names.push_back("frame_token1");
                         pt.push_back(uniform(1, kC, rng, -0.5, 0.5));
                         fn = [mg](Graph<double>& g, const std::vector<Var<double>>& x) {
                             const auto feats = features_of(x, 0, 3, true);
                             // key frame in the middle: forward and backward passes both run
                             std::map<int, Var<double>> tokens = {{1, x[6]}};
                             auto preds = mg.segment_video(g, std::span<const FrameFeatures<double>>(feats), tokens);
                             Var<double> total = weighted(g, preds[0].logits, 22);
                             for (std::size_t t = 0; t < preds.size(); ++t) {
                                 if (t > 0) total = ops::add(total, weighted(g, preds[t].logits, 22 + t));
                                 total = ops::add(total, preds[t].presence);
                             }
                             return total;
                         };
                     }});
    return cases;
}

std::vector<Case> training_cases() {
    std::vector<Case> cases;
    auto weights = [] {
        LossWeights w;
        w.text = 1.0;
        w.bce = 2.0;
        w.dice = 0.5;
        w.cls = 0.5;
        return w;
    };
    cases.push_back({"stage1_loss", [weights](auto& rng, auto& names, auto& pt, auto&, GraphFn& fn) {
                         names = {"logits", "probs0", "probs1"};
                         pt = {uniform(3, 6, rng, -2, 2), uniform(4, 4, rng, 0.2, 0.8), uniform(4, 4, rng, 0.2, 0.8)};
                         std::vector<Mat<double>> gts = {binary(4, 4, rng), binary(4, 4, rng)};
                         const LossWeights w = weights();
                         fn = [gts, w](Graph<double>&, const std::vector<Var<double>>& x) {
                             const std::vector<int> labels = {1, 4, 2};
                             Var<double> ce = ops::cross_entropy(x[0], std::span<const int>(labels));
                             std::vector<Var<double>> probs = {x[1], x[2]};
                             return stage1_loss<double>(ce, probs, gts, w).total;
                         };
                     }});
    cases.push_back({"stage2_loss", [weights](auto& rng, auto& names, auto& pt, auto&, GraphFn& fn) {
                         names = {"logits", "presence0", "presence1", "presence2", "probs0", "probs1", "probs2"};
                         pt = {uniform(3, 6, rng, -2, 2)};
                         for (int t = 0; t < 3; ++t) pt.push_back(uniform(1, 1, rng, 0.1, 0.9));
                         for (int t = 0; t < 3; ++t) pt.push_back(uniform(4, 4, rng, 0.2, 0.8));
                         std::vector<Mat<double>> gts = {binary(4, 4, rng), Mat<double>::Zero(4, 4), binary(4, 4, rng)};
                         const LossWeights w = weights();
                         fn = [gts, w](Graph<double>&, const std::vector<Var<double>>& x) {
                             const std::vector<int> labels = {1, 4, 2};
                             const std::vector<int> present = {1, 0, 1};
                             Var<double> ce = ops::cross_entropy(x[0], std::span<const int>(labels));
                             std::vector<Var<double>> presence = {x[1], x[2], x[3]};
                             std::vector<Var<double>> probs = {x[4], x[5], x[6]};
                             return stage2_loss<double>(ce, presence, present, probs, gts, w).total;
                         };
                     }});
    return cases;
}

const std::map<std::string, std::function<std::vector<Case>()>>& registry() {
    static const std::map<std::string, std::function<std::vector<Case>()>> table = {
        {"numerics", numerics_cases},     {"trajectory_encoder", trajectory_cases},
        {"reasoning_core", reasoner_cases}, {"fci", fci_cases},
        {"mask_generator", mask_cases},   {"training", training_cases},
    };
    return table;
}

}  // namespace

const std::vector<std::string>& grad_suite_modules() {
    static const std::vector<std::string> names = {"numerics", "trajectory_encoder", "reasoning_core",
                                                   "fci",      "mask_generator",     "training"};
    return names;
}

std::vector<GradCheckReport> run_grad_suite(const std::string& module, const GradSuiteOptions& opt) {
    if (module == "all") {
        std::vector<GradCheckReport> all;
        for (const auto& m : grad_suite_modules()) {
            auto r = run_grad_suite(m, opt);
            all.insert(all.end(), r.begin(), r.end());
        }
        return all;
    }
    auto it = registry().find(module);
    if (it == registry().end()) throw InputError("unknown module '" + module + "'");
    std::vector<GradCheckReport> out;
    std::uint64_t salt = 0;
    for (const Case& c : it->second()) {
        GradCheckReport merged;
        merged.passed = true;
        for (int p = 0; p < opt.points; ++p) {
            std::mt19937_64 rng(opt.seed * 1000003ull + (++salt) * 7919ull);
            std::vector<std::string> names;
            std::vector<Mat<double>> point;
            ParamStore<double> store;
            GraphFn fn;
            c.make(rng, names, point, store, fn);
            GradCheckReport r = check(module + "/" + c.name, names, point, store, fn, rng, opt);
            merge(merged, r);
        }
        out.push_back(merged);
    }
    return out;
}

std::string grad_report_table(const std::vector<GradCheckReport>& reports) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-40s %-28s %12s  %s\n", "operation", "input", "max_rel_err", "result");
    out += buf;
    for (const auto& r : reports) {
        for (std::size_t i = 0; i < r.input_names.size(); ++i) {
            const bool ok = r.max_relative_error[i] <= r.tolerance;
            std::snprintf(buf, sizeof buf, "%-40s %-28s %12.3e  %s\n", r.operation.c_str(), r.input_names[i].c_str(),
                          r.max_relative_error[i], ok ? "pass" : "FAIL");
            out += buf;
        }
    }
    return out;
}

}  // namespace trajseg

#include <doctest.h>

#include "fixtures.hpp"
#include "trajseg/numerics/grad_suite.hpp"
#include "trajseg/training/optimizer.hpp"

using namespace trajseg;

namespace {

template <typename S>
const Var<S>* const kNoVisual = nullptr;

struct Core {
    RunConfig cfg = fixture::tiny_config();
    ParamStore<double> store;
    Reasoner reasoner;

    explicit Core(int vocab = 10, int heads = 1, std::uint64_t seed = 1) {
        cfg.heads = heads;
        std::mt19937_64 rng(seed);
        reasoner = Reasoner(ParamInit<double>(store, rng, ""), cfg, vocab);
        // Nonzero biases and norms so the oracle sees every term.
        std::normal_distribution<double> nd(0.0, 0.3);
        for (auto& p : store) {
            if (p.name.ends_with(".b") || p.name.ends_with(".g")) {
                for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value(i) += nd(rng);
            }
        }
    }

    const Mat<double>& at(const std::string& name) const { return store.at(name).value; }

    Mat<double> logits(const std::vector<int>& text) const {
        Tape<double> t;
        Graph<double> g(t, store);
        return reasoner.forward(g, kNoVisual<double>, std::span<const int>(text)).logits.value();
    }
};

// ---- straight-line oracle over std::vector rows ---------------------------

using Rows = std::vector<std::vector<double>>;

Rows linear(const Rows& x, const Mat<double>& w, const Mat<double>& b) {
    Rows y(x.size(), std::vector<double>(static_cast<std::size_t>(w.cols())));
    for (std::size_t r = 0; r < x.size(); ++r) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            double s = b(0, j);
            for (Eigen::Index i = 0; i < w.rows(); ++i) s += x[r][static_cast<std::size_t>(i)] * w(i, j);
            y[r][static_cast<std::size_t>(j)] = s;
        }
    }
    return y;
}

Rows layer_norm(const Rows& x, const Mat<double>& g, const Mat<double>& b) {
    Rows y = x;
    for (std::size_t r = 0; r < x.size(); ++r) {
        const double n = static_cast<double>(x[r].size());
        double mu = 0, var = 0;
        for (double v : x[r]) mu += v;
        mu /= n;
        for (double v : x[r]) var += (v - mu) * (v - mu);
        var /= n;
        for (std::size_t c = 0; c < x[r].size(); ++c) {
            y[r][c] = (x[r][c] - mu) / std::sqrt(var + 1e-5) * g(0, static_cast<Eigen::Index>(c)) +
                      b(0, static_cast<Eigen::Index>(c));
        }
    }
    return y;
}

Rows add(Rows a, const Rows& b) {
    for (std::size_t r = 0; r < a.size(); ++r) {
        for (std::size_t c = 0; c < a[r].size(); ++c) a[r][c] += b[r][c];
    }
    return a;
}

double gelu(double x) { return 0.5 * x * (1 + std::tanh(std::sqrt(2 / M_PI) * (x + 0.044715 * x * x * x))); }

Rows causal_attention(const Rows& q, const Rows& k, const Rows& v) {
    const std::size_t n = q.size(), d = q[0].size();
    Rows out(n, std::vector<double>(v[0].size(), 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> s(i + 1);
        double mx = -1e300, z = 0;
        for (std::size_t j = 0; j <= i; ++j) {
            double dot = 0;
            for (std::size_t c = 0; c < d; ++c) dot += q[i][c] * k[j][c];
            s[j] = dot / std::sqrt(static_cast<double>(d));
            mx = std::max(mx, s[j]);
        }
        for (auto& x : s) z += (x = std::exp(x - mx));
        for (std::size_t j = 0; j <= i; ++j) {
            for (std::size_t c = 0; c < v[0].size(); ++c) out[i][c] += s[j] / z * v[j][c];
        }
    }
    return out;
}

Rows oracle_logits(const Core& m, const std::vector<int>& text) {
    const Mat<double>& tok = m.at("tok");
    const Mat<double>& pos = m.at("pos");
    Rows x;
    for (std::size_t i = 0; i < text.size(); ++i) {
        std::vector<double> row;
        for (Eigen::Index c = 0; c < tok.cols(); ++c) row.push_back(tok(text[i], c) + pos(static_cast<Eigen::Index>(i), c));
        x.push_back(row);
    }
    auto p = [&](const std::string& s) -> const Mat<double>& { return m.at("layer0." + s); };
    const Rows h = layer_norm(x, p("ln1.g"), p("ln1.b"));
    const Rows a = causal_attention(linear(h, p("q.w"), p("q.b")), linear(h, p("k.w"), p("k.b")),
                                    linear(h, p("v.w"), p("v.b")));
    x = add(x, linear(a, p("o.w"), p("o.b")));
    Rows u = linear(layer_norm(x, p("ln2.g"), p("ln2.b")), p("mlp1.w"), p("mlp1.b"));
    for (auto& r : u) {
        for (auto& v : r) v = gelu(v);
    }
    x = add(x, linear(u, p("mlp2.w"), p("mlp2.b")));
    return linear(layer_norm(x, m.at("ln_f.g"), m.at("ln_f.b")), m.at("head.w"), m.at("head.b"));
}

}  // namespace

TEST_CASE("tokenize and detokenize") {
    const Vocabulary v = Vocabulary::synthetic();
    CHECK(v.tokenize("").empty());
    const auto ids = v.tokenize("red circle moving left");
    CHECK(ids.size() == 4);
    CHECK(v.detokenize(ids) == "red circle moving left");
    CHECK(v.tokenize("<TRJ>") == std::vector<int>{Vocabulary::kTrj});
    CHECK(v.tokenize("<PLH>") == std::vector<int>{Vocabulary::kPlaceholder});
    CHECK_THROWS_AS((void)v.tokenize("red zebra"), TokenizationError);
    const std::string reply = response_text("red circle moving left");
    CHECK(v.detokenize(v.tokenize(reply)) == reply);
    CHECK(v.detokenize(v.tokenize(captioning_instruction())) == captioning_instruction());
    for (const auto& w : scene_vocabulary()) CHECK(v.detokenize(v.tokenize(w)) == w);
}

TEST_CASE("reserved ids are fixed and distinct") {
    const Vocabulary v = Vocabulary::synthetic();
    CHECK(v.token(0) == "<pad>");
    CHECK(v.token(1) == "<bos>");
    CHECK(v.token(2) == "<eos>");
    CHECK(v.token(3) == "<TRJ>");
    CHECK(v.token(4) == "<PLH>");
    for (int i = 0; i < v.size(); ++i) CHECK(v.id(v.token(i)) == i);
    CHECK_THROWS((void)Vocabulary({"red", "red"}));
}

TEST_CASE("vocabulary file round trip") {
    fixture::TempDir dir("vocab");
    const Vocabulary v = Vocabulary::synthetic();
    const std::string path = (dir.path() / "vocab.txt").string();
    v.save(path);
    CHECK(Vocabulary::load(path).tokens() == v.tokens());
}

TEST_CASE("build_sample follows the instruction templates") {
    const Vocabulary v = Vocabulary::synthetic();
    const Sample g = build_sample(v, SampleKind::grounding, "red circle", "vid", std::nullopt);
    CHECK(v.detokenize(g.input_ids) == "Can you segment the red circle in this video?");
    CHECK(v.detokenize(g.target_ids) == "Sure, red circle <TRJ>.");
    const Sample t = build_sample(v, SampleKind::tracking, "red circle", "vid", std::nullopt);
    CHECK(t.input_ids.empty());
    CHECK(t.target_ids.empty());
    const ObjectTrajectory traj{{Box{0.1, 0.1, 0.4, 0.4}, std::nullopt}};
    const Sample c = build_sample(v, SampleKind::captioning, "red circle", "vid", traj);
    CHECK(std::count(c.input_ids.begin(), c.input_ids.end(), Vocabulary::kPlaceholder) == 1);
    CHECK(v.detokenize(c.input_ids) == "Can you describe <PLH> in this video?");
    CHECK(v.detokenize(c.target_ids) == "Sure, red circle <TRJ>.");
    REQUIRE(c.trajectory.has_value());
    CHECK_THROWS_AS((void)build_sample(v, SampleKind::captioning, "red circle", "vid", std::nullopt), InputError);
}

TEST_CASE("zero output head gives zero logits") {
    Core m;
    m.store.at("head.w").value.setZero();
    m.store.at("head.b").value.setZero();
    const Mat<double> l = m.logits({1, 5, 6, 7});
    CHECK(l.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single-layer single-head logits match the straight-line oracle") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Core m(10, 1, seed);
        const std::vector<int> text = {1, 6, 9};
        const Mat<double> l = m.logits(text);
        const Rows o = oracle_logits(m, text);
        for (std::size_t r = 0; r < 3; ++r) {
            for (Eigen::Index c = 0; c < l.cols(); ++c) CHECK(std::abs(l(static_cast<Eigen::Index>(r), c) - o[r][static_cast<std::size_t>(c)]) < 1e-10);
        }
    }
}

TEST_CASE("causal mask: later tokens never change earlier logits") {
    Core m(12, 2);
    const std::vector<int> text = {1, 5, 6, 7, 8, 9, 10};
    const Mat<double> base = m.logits(text);
    for (std::size_t j = 1; j < text.size(); ++j) {
        std::vector<int> changed = text;
        changed[j] = changed[j] == 11 ? 5 : 11;
        const Mat<double> l = m.logits(changed);
        CHECK((l.topRows(static_cast<Eigen::Index>(j)) - base.topRows(static_cast<Eigen::Index>(j))).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("sequence longer than max_len is a capacity error") {
    Core m;
    CHECK_THROWS_AS((void)m.logits(std::vector<int>(40, 5)), CapacityError);
    Tape<double> t;
    Graph<double> g(t, m.store);
    const Var<double> visual = g.constant(Mat<double>::Zero(30, 8));
    const std::vector<int> text = {1, 5, 6};
    CHECK_THROWS_AS((void)m.reasoner.forward(g, &visual, std::span<const int>(text)), CapacityError);
}

TEST_CASE("extract_trj reads the hidden state at <TRJ>") {
    Core m;
    Tape<double> t;
    Graph<double> g(t, m.store);
    const std::vector<int> input = {5, 6};
    const std::vector<int> target = {7, Vocabulary::kTrj};
    const auto out = m.reasoner.teacher_forced(g, kNoVisual<double>, std::span<const int>(input), std::span<const int>(target));
    const Mat<double> x = m.reasoner.extract_trj(g, out, std::span<const int>(target)).value();
    const Mat<double> last = out.hidden.value().bottomRows(1);
    const Mat<double>& w = m.at("trj.w");
    const Mat<double>& b = m.at("trj.b");
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
        double s = b(0, j);
        for (Eigen::Index i = 0; i < w.rows(); ++i) s += last(0, i) * w(i, j);
        CHECK(std::abs(x(0, j) - s) < 1e-12);
    }
    const std::vector<int> none = {7, 8};
    const std::vector<int> twice = {Vocabulary::kTrj, Vocabulary::kTrj};
    CHECK_THROWS_AS((void)m.reasoner.extract_trj(g, out, std::span<const int>(none)), InputError);
    CHECK_THROWS_AS((void)m.reasoner.extract_trj(g, out, std::span<const int>(twice)), InputError);
}

TEST_CASE("captioning text loss trains the trajectory encoder") {
    RunConfig cfg = fixture::tiny_config();
    const Vocabulary vocab = Vocabulary::synthetic();
    ParamStore<double> store;
    const TrajSegModel model(cfg, vocab.size(), store);
    SceneConfig sc;
    sc.height = cfg.height;
    sc.width = cfg.width;
    sc.frames = cfg.frames;
    sc.min_size = 2;
    sc.max_size = 3;
    const RenderedSample rs = generate_scene(sc, 11);
    const Sample s = build_sample(vocab, SampleKind::captioning, rs.description, "v", rs.trajectory(),
                                  uniform_key_frames(cfg.frames, cfg.key_frames));
    std::vector<FrameInput<double>> inputs;
    for (const auto& f : rs.frames) inputs.push_back(make_frame_input<double>(f, cfg.patch));
    Tape<double> t;
    Graph<double> g(t, store);
    const auto r = model.forward(g, s, std::span<const FrameInput<double>>(inputs));
    REQUIRE(r.text_loss.has_value());
    Gradients<double> grads;
    t.backward(*r.text_loss, &grads);
    const std::size_t idx = store.at("trajectory.linear.w").index;
    CHECK(grads.get(store, idx).norm() > 0);
}

TEST_CASE("teacher-forced CE on one grounding sample drops below 0.05 nats") {
    RunConfig cfg = fixture::tiny_config();
    cfg.channels = 16;
    cfg.heads = 2;
    cfg.layers = 2;
    const Vocabulary vocab = Vocabulary::synthetic();
    ParamStore<float> store;
    std::mt19937_64 rng(1);
    const Reasoner reasoner(ParamInit<float>(store, rng, ""), cfg, vocab.size());
    const Sample s = build_sample(vocab, SampleKind::grounding, "blue square moving up", "v", std::nullopt);
    AdamWOptions opt;
    opt.learning_rate = 3e-3;
    AdamW<float> adam(opt);
    double ce = 1e9;
    int step = 0;
    for (; step < 500 && ce >= 0.05; ++step) {
        Tape<float> t;
        Graph<float> g(t, store);
        const auto out = reasoner.teacher_forced(g, kNoVisual<float>, std::span<const int>(s.input_ids), std::span<const int>(s.target_ids));
        const Var<float> loss = reasoner.text_loss(out, std::span<const int>(s.target_ids));
        ce = loss.value()(0, 0);
        Gradients<float> grads;
        t.backward(loss, &grads);
        adam.step(store, grads);
    }
    INFO("steps " << step << " ce " << ce);
    CHECK(ce < 0.05);
}

TEST_CASE("reasoning core gradient suite passes") {
    for (const auto& r : run_grad_suite("reasoning_core")) {
        INFO(r.operation << " worst " << r.worst());
        CHECK(r.passed);
    }
}

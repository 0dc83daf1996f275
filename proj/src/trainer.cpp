#include "trajseg/training/trainer.hpp"

#include <cmath>
#include <cstdio>

#include "trajseg/errors.hpp"
#include "trajseg/parallel.hpp"

namespace trajseg {

namespace {

std::vector<FrameInput<float>> frame_inputs(const std::vector<RgbImage>& frames, int patch) {
    std::vector<FrameInput<float>> out;
    out.reserve(frames.size());
    for (const auto& f : frames) out.push_back(make_frame_input<float>(f, patch));
    return out;
}

std::vector<Mat<float>> mask_targets(const std::vector<Mask>& masks) {
    std::vector<Mat<float>> out;
    out.reserve(masks.size());
    for (const auto& m : masks) out.push_back(m.cast<float>().matrix());
    return out;
}

DataMix stage_mix(const RunConfig& c, int stage) {
    if (stage == 1) return c.use_bialign ? DataMix{0.0, 0.5, 0.5} : DataMix{0.0, 1.0, 0.0};
    if (c.use_bialign) return {c.tracking_fraction, c.grounding_fraction, c.captioning_fraction};
    return {c.tracking_fraction, c.grounding_fraction + c.captioning_fraction, 0.0};
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a * 0x9E3779B97F4A7C15ull + b + 0x632BE59BD9B4E019ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

Sample make_sample(const Vocabulary& vocab, SampleKind kind, const std::string& description, const std::string& name,
                   const ObjectTrajectory& traj, std::vector<int> keys, bool bialign) {
    if (kind == SampleKind::captioning && (!bialign || traj.present_count() == 0)) kind = SampleKind::grounding;
    return build_sample(vocab, kind, description, name,
                        kind == SampleKind::captioning ? std::optional<ObjectTrajectory>(traj) : std::nullopt,
                        std::move(keys));
}

}  // namespace

PreparedSample prepare_video_sample(const VideoRecord& video, SampleKind kind, const Vocabulary& vocab,
                                    const RunConfig& config) {
    if (video.masks.size() != video.frames.size()) throw InputError(video.name + ": training video needs masks");
    PreparedSample p;
    p.sample = make_sample(vocab, kind, video.description, video.name, video.trajectory(),
                           uniform_key_frames(video.frame_count(), config.key_frames), config.use_bialign);
    p.inputs = frame_inputs(video.frames, config.patch);
    p.masks = mask_targets(video.masks);
    for (const auto& m : video.masks) p.presence.push_back(m.any() ? 1 : 0);
    return p;
}

PreparedSample prepare_still_sample(const VideoRecord& video, SampleKind kind, const Vocabulary& vocab,
                                    const RunConfig& config, std::uint64_t seed) {
    int source = 0;
    while (source < video.frame_count() && !video.masks[static_cast<std::size_t>(source)].any()) ++source;
    if (source == video.frame_count()) source = 0;
    PseudoVideoOptions opt;
    opt.frames = config.stage1_frames;
    opt.random_amplitude = config.pseudo_jitter;
    opt.seed = seed;
    const RenderedSample pseudo = image_to_pseudo_video(still_sample(video, source), 0, opt);
    PreparedSample p;
    std::vector<int> keys(static_cast<std::size_t>(pseudo.frame_count()));
    for (int t = 0; t < pseudo.frame_count(); ++t) keys[static_cast<std::size_t>(t)] = t;
    if (kind == SampleKind::tracking) kind = SampleKind::grounding;
    p.sample = make_sample(vocab, kind, video.appearance, video.name, pseudo.trajectory(), keys, config.use_bialign);
    p.inputs = frame_inputs(pseudo.frames, config.patch);
    p.masks = mask_targets(pseudo.masks);
    for (auto v : pseudo.presence) p.presence.push_back(v);
    return p;
}

SampleLoss sample_loss(const TrajSegModel& model, const ParamStore<float>& params, const PreparedSample& s, int stage,
                       Gradients<float>* grads) {
    Tape<float> tape;
    Graph<float> g(tape, params);
    const ForwardResult<float> r =
        model.forward(g, s.sample, std::span<const FrameInput<float>>(s.inputs), &s.masks);
    const LossWeights w = LossWeights::from(model.config());
    std::vector<Var<float>> probs, presence;
    std::vector<Mat<float>> gts;
    std::vector<int> present;
    for (std::size_t t = 0; t < r.predictions.size(); ++t) {
        if (!r.predictions[t]) continue;
        probs.push_back(ops::sigmoid(r.predictions[t]->logits));
        presence.push_back(r.predictions[t]->presence);
        gts.push_back(s.masks[t]);
        present.push_back(s.presence[t]);
    }
    LossTerms<float> terms = stage == 1 ? stage1_loss<float>(r.text_loss, probs, gts, w)
                                        : stage2_loss<float>(r.text_loss, presence, present, probs, gts, w);
    SampleLoss out{terms.total.value()(0, 0), terms.text, terms.mask, terms.cls};
    if (grads != nullptr && std::isfinite(out.total)) tape.backward(terms.total, grads);
    return out;
}

std::string loss_curve_csv(const std::vector<StepLog>& log) {
    std::string out = "stage,step,total,text,mask,cls\n";
    char buf[256];
    for (const auto& l : log) {
        std::snprintf(buf, sizeof(buf), "%d,%lld,%.9g,%.9g,%.9g,%.9g\n", l.stage, l.step, l.total, l.text, l.mask, l.cls);
        out += buf;
    }
    return out;
}

Trainer::Trainer(const RunConfig& config, Vocabulary vocab)
    : config_(config), vocab_(std::move(vocab)), model_(config, vocab_.size(), params_) {}

void Trainer::load_weights(const ParamStore<float>& source) { assign_parameters(params_, source); }

std::vector<StepLog> Trainer::train(int stage, const std::vector<VideoRecord>& videos, const StepCallback& on_step) {
    if (stage != 1 && stage != 2) throw ConfigError("stage must be 1 or 2");
    if (videos.empty()) throw InputError("training set is empty");
    const int epochs = stage == 1 ? config_.stage1_epochs : config_.stage2_epochs;
    const int batch = config_.batch_size;
    const int threads = resolve_threads(config_.threads);
    AdamW<float> opt({config_.learning_rate, config_.weight_decay, config_.beta1, config_.beta2, config_.adam_eps,
                      config_.grad_clip});
    const DataMix mix = stage_mix(config_, stage);
    std::vector<StepLog> log;
    long long step = 0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        const auto schedule =
            mix_epoch(static_cast<int>(videos.size()), mix, mix_seed(config_.train_seed, static_cast<std::uint64_t>(stage * 100000 + epoch)));
        for (std::size_t start = 0; start < schedule.size(); start += static_cast<std::size_t>(batch)) {
            const int n = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(batch), schedule.size() - start));
            std::vector<Gradients<float>> grads(static_cast<std::size_t>(n));
            std::vector<SampleLoss> losses(static_cast<std::size_t>(n));
            parallel_for(n, threads, [&](int i) {
                const ScheduledSample& item = schedule[start + static_cast<std::size_t>(i)];
                const VideoRecord& v = videos[static_cast<std::size_t>(item.video)];
                const PreparedSample p =
                    stage == 1 ? prepare_still_sample(v, item.kind, vocab_, config_,
                                                      mix_seed(config_.train_seed ^ 0x5157ull, static_cast<std::uint64_t>(step * batch + i)))
                               : prepare_video_sample(v, item.kind, vocab_, config_);
                losses[static_cast<std::size_t>(i)] = sample_loss(model_, params_, p, stage, &grads[static_cast<std::size_t>(i)]);
            });
            StepLog entry{stage, step, 0, 0, 0, 0};
            Gradients<float> total;
            for (int i = 0; i < n; ++i) {
                const SampleLoss& l = losses[static_cast<std::size_t>(i)];
                if (!std::isfinite(l.total)) {
                    throw NumericError("non-finite loss at stage " + std::to_string(stage) + " step " + std::to_string(step));
                }
                entry.total += l.total / n;
                entry.text += l.text / n;
                entry.mask += l.mask / n;
                entry.cls += l.cls / n;
                total.accumulate(grads[static_cast<std::size_t>(i)]);
            }
            opt.step(params_, total, 1.0 / n);
            log.push_back(entry);
            ++step;
            if (on_step && on_step(entry)) return log;
            if (config_.max_steps > 0 && step >= config_.max_steps) return log;
        }
    }
    return log;
}

VideoPrediction predict_video(const TrajSegModel& model, const ParamStore<float>& params, const Vocabulary& vocab,
                              const std::vector<RgbImage>& frames, const std::string& instruction, int key_frames) {
    const std::vector<int> ids = vocab.tokenize(instruction);
    const auto inputs = frame_inputs(frames, model.config().patch);
    const std::vector<int> keys = uniform_key_frames(static_cast<int>(frames.size()), key_frames);
    InferenceResult<float> r = model.infer(params, std::span<const FrameInput<float>>(inputs), ids, keys);
    VideoPrediction out;
    out.response = r.response;
    out.presence = r.presence;
    for (auto& p : r.probabilities) out.masks.push_back(binarize(p));
    out.probabilities = std::move(r.probabilities);
    return out;
}

MetricReport evaluate_model(const TrajSegModel& model, const ParamStore<float>& params, const Vocabulary& vocab,
                            const std::vector<VideoRecord>& videos, int key_frames, int threads) {
    std::vector<VideoReport> reports(videos.size());
    parallel_for(static_cast<int>(videos.size()), resolve_threads(threads), [&](int i) {
        const VideoRecord& v = videos[static_cast<std::size_t>(i)];
        const VideoPrediction p = predict_video(model, params, vocab, v.frames, grounding_instruction(v.description), key_frames);
        reports[static_cast<std::size_t>(i)] = evaluate_video(v.name, p.masks, v.masks);
    });
    return aggregate(std::move(reports));
}

}  // namespace trajseg

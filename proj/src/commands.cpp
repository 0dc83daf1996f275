#include "trajseg/cli/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "trajseg/errors.hpp"
#include "trajseg/io/checkpoint.hpp"
#include "trajseg/io/rle.hpp"
#include "trajseg/numerics/grad_suite.hpp"
#include "trajseg/parallel.hpp"
#include "trajseg/training/trainer.hpp"

namespace trajseg {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed: " + path.string());
}

// Sidecar files share the checkpoint's stem: model.ckpt -> model.loss.csv.
fs::path sidecar(const fs::path& checkpoint, const std::string& suffix) {
    fs::path p = checkpoint;
    p.replace_extension();
    p += suffix;
    return p;
}

Vocabulary checkpoint_vocabulary(const fs::path& checkpoint) {
    const fs::path p = sidecar(checkpoint, ".vocab.txt");
    return fs::exists(p) ? Vocabulary::load(p.string()) : Vocabulary::synthetic();
}

std::vector<fs::path> video_dirs(const fs::path& split_dir) {
    if (!fs::is_directory(split_dir)) throw IoError("directory not found: " + split_dir.string());
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(split_dir)) {
        if (e.is_directory()) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

std::string presence_csv(const std::vector<float>& presence) {
    std::string out = "frame,presence\n";
    char buf[64];
    for (std::size_t t = 0; t < presence.size(); ++t) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f\n", t, static_cast<double>(presence[t]));
        out += buf;
    }
    return out;
}

}  // namespace

std::string resolve_path(const RunConfig& config, const std::string& path) {
    const fs::path p(path);
    if (p.is_absolute()) return p.string();
    return (fs::path(config.root) / p).lexically_normal().string();
}

void cmd_gen_data(const RunConfig& config, bool force, std::ostream& log) {
    config.validate();
    const std::string root = resolve_path(config, config.dataset);
    const Dataset data = generate_dataset(config);
    write_dataset(root, data, force);
    Vocabulary::synthetic().save((fs::path(root) / "vocab.txt").string());
    log << "wrote " << data.train.size() << " train and " << data.val.size() << " val videos to " << root
        << " (data_seed " << config.data_seed << ")\n";
}

void cmd_train(const RunConfig& config, int stage, std::ostream& log) {
    if (stage != 1 && stage != 2) throw ConfigError("--stage must be 1 or 2");
    config.validate();
    const fs::path data_root = resolve_path(config, config.dataset);
    if (!fs::is_directory(data_root / "train")) {
        throw ConfigError("training data not found: " + (data_root / "train").string() + " (run gen-data first)");
    }
    const fs::path vocab_path = data_root / "vocab.txt";
    Vocabulary vocab = fs::exists(vocab_path) ? Vocabulary::load(vocab_path.string()) : Vocabulary::synthetic();

    Trainer trainer(config, vocab);
    if (!config.init_checkpoint.empty()) {
        const fs::path init = resolve_path(config, config.init_checkpoint);
        if (!fs::exists(init)) throw ConfigError("init checkpoint not found: " + init.string());
        trainer.load_weights(load_checkpoint(init.string()).params);
        log << "initialized from " << init.string() << "\n";
    }
    const std::vector<VideoRecord> videos = read_split(data_root.string(), "train");
    log << "stage " << stage << ": " << videos.size() << " videos\n";

    const auto logs = trainer.train(stage, videos, [&](const StepLog& s) {
        if ((s.step + 1) % 50 == 0) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "step %lld total %.4f text %.4f mask %.4f cls %.4f\n", s.step + 1,
                          s.total, s.text, s.mask, s.cls);
            log << buf;
        }
        return false;
    });

    const fs::path ckpt = resolve_path(config, config.checkpoint);
    std::error_code ec;
    if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path(), ec);
    save_checkpoint(ckpt.string(), config, trainer.params());
    vocab.save(sidecar(ckpt, ".vocab.txt").string());
    write_text(sidecar(ckpt, ".loss.csv"), loss_curve_csv(logs));
    log << "wrote " << ckpt.string() << " after " << logs.size() << " steps\n";
}

void cmd_infer(const RunConfig& config, const InferOptions& options, std::ostream& log) {
    if (options.video.empty() == options.split.empty()) throw ConfigError("give exactly one of --video or --split");
    const fs::path ckpt = resolve_path(config, options.checkpoint.empty() ? config.checkpoint : options.checkpoint);
    if (!fs::exists(ckpt)) throw ConfigError("checkpoint not found: " + ckpt.string());
    Checkpoint loaded = load_checkpoint(ckpt.string());
    const Vocabulary vocab = checkpoint_vocabulary(ckpt);
    ParamStore<float> params;
    const TrajSegModel model(loaded.config, vocab.size(), params);
    assign_parameters(params, loaded.params);

    const int kf = options.key_frames > 0 ? options.key_frames : config.key_frames;
    const fs::path out_root = resolve_path(config, options.output.empty() ? config.output : options.output);

    std::vector<fs::path> dirs;
    if (!options.video.empty()) {
        dirs.push_back(resolve_path(config, options.video));
    } else {
        dirs = video_dirs(fs::path(resolve_path(config, config.dataset)) / options.split);
    }
    // Tokenize up front so an out-of-vocabulary instruction fails before any output.
    if (!options.instruction.empty()) (void)vocab.tokenize(options.instruction);

    std::vector<std::string> names(dirs.size());
    parallel_for(static_cast<int>(dirs.size()), resolve_threads(config.threads), [&](int i) {
        const fs::path& dir = dirs[static_cast<std::size_t>(i)];
        std::string instruction = options.instruction;
        if (instruction.empty()) {
            if (!fs::exists(dir / "manifest.txt")) {
                throw InputError("no instruction given and no manifest in " + dir.string());
            }
            instruction = grounding_instruction(read_video(dir.string()).description);
        }
        const std::vector<RgbImage> frames = read_frames(dir.string());
        const VideoPrediction p = predict_video(model, params, vocab, frames, instruction, kf);
        const fs::path out = out_root / dir.filename();
        std::error_code ec;
        fs::create_directories(out, ec);
        if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
        for (std::size_t t = 0; t < p.masks.size(); ++t) {
            write_rle((out / mask_file_name(static_cast<int>(t))).string(), p.masks[t]);
        }
        write_text(out / "presence.csv", presence_csv(p.presence));
        write_text(out / "response.txt", vocab.detokenize(p.response) + "\n");
        names[static_cast<std::size_t>(i)] = dir.filename().string();
    });
    log << "wrote predictions for " << names.size() << " video(s) to " << out_root.string() << " (kf " << kf << ")\n";
}

MetricReport cmd_eval(const RunConfig& config, const EvalOptions& options, std::ostream& log) {
    const fs::path pred_root = resolve_path(config, options.predictions.empty() ? config.output : options.predictions);
    const fs::path gt_root = options.ground_truth.empty()
                                 ? fs::path(resolve_path(config, config.dataset)) / "val"
                                 : fs::path(resolve_path(config, options.ground_truth));
    std::vector<VideoReport> reports;
    for (const auto& dir : video_dirs(gt_root)) {
        const std::string name = dir.filename().string();
        const std::vector<Mask> gt = read_masks(dir.string());
        if (gt.empty()) throw InputError("video " + name + ": no ground-truth masks");
        const fs::path pdir = pred_root / name;
        if (!fs::is_directory(pdir)) throw InputError("video " + name + ": no prediction directory");
        const std::vector<Mask> pred = read_masks(pdir.string());
        if (pred.size() != gt.size()) {
            throw InputError("video " + name + ": " + std::to_string(pred.size()) + " predicted frames vs " +
                             std::to_string(gt.size()) + " ground-truth frames");
        }
        for (std::size_t t = 0; t < gt.size(); ++t) {
            if (pred[t].rows() != gt[t].rows() || pred[t].cols() != gt[t].cols()) {
                throw InputError("video " + name + ": mask size mismatch at frame " + std::to_string(t));
            }
        }
        reports.push_back(evaluate_video(name, pred, gt));
    }
    MetricReport report = aggregate(std::move(reports));
    const fs::path out = options.output.empty() ? pred_root : fs::path(resolve_path(config, options.output));
    write_text(out / "report.csv", report_csv(report));
    const std::string table = report_table(report);
    write_text(out / "report.txt", table);
    write_text(out / "buckets.csv", buckets_csv(length_buckets(report.videos, options.bucket_edges)));
    log << table;
    return report;
}

bool cmd_gradcheck(const std::string& module, bool inject_fault, std::ostream& log) {
    GradSuiteOptions opt;
    if (inject_fault) opt.check.analytic_scale = 2.0;
    const auto reports = run_grad_suite(module, opt);
    log << grad_report_table(reports);
    const auto failed = std::count_if(reports.begin(), reports.end(), [](const auto& r) { return !r.passed; });
    log << reports.size() - static_cast<std::size_t>(failed) << "/" << reports.size() << " operations passed\n";
    return failed == 0;
}

}  // namespace trajseg

// trajseg: data generation, two-stage training, inference, evaluation and
// gradient checking from one executable.
//
// Exit codes: 0 success, 1 runtime error (or failed gradient check), 2 usage error.

#include <algorithm>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "trajseg/cli/commands.hpp"
#include "trajseg/errors.hpp"
#include "trajseg/numerics/grad_suite.hpp"

namespace {

struct Globals {
    std::string root;
    std::string config_file;
    int threads = 0;
    std::vector<std::string> overrides;
};

trajseg::RunConfig build_config(const Globals& g) {
    trajseg::RunConfig c = g.config_file.empty() ? trajseg::RunConfig{} : trajseg::load_config(g.config_file);
    for (const auto& o : g.overrides) trajseg::apply_config_override(c, o);
    if (!g.root.empty()) c.root = g.root;
    if (g.threads > 0) c.threads = g.threads;
    c.validate();
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trajectory-token video reasoning segmentation"};
    app.require_subcommand(1);

    Globals g;
    app.add_option("--root", g.root, "Directory every relative path is resolved against");
    app.add_option("--config", g.config_file, "key=value config file");
    app.add_option("--threads", g.threads, "Worker threads (default: TRAJSEG_THREADS, else 1)")
        ->check(CLI::NonNegativeNumber);

    auto add_overrides = [&](CLI::App* sub) {
        sub->add_option("overrides", g.overrides, "Config overrides as key=value");
    };

    bool force = false;
    long long seed = -1;
    auto* gen = app.add_subcommand("gen-data", "Generate the synthetic train/val corpus");
    gen->add_flag("--force", force, "Overwrite a non-empty dataset directory");
    gen->add_option("--seed", seed, "Data seed")->check(CLI::NonNegativeNumber);
    add_overrides(gen);

    int stage = 0;
    auto* train = app.add_subcommand("train", "Run one training stage");
    train->add_option("--stage", stage, "1: image pre-training, 2: video training")
        ->required()
        ->check(CLI::IsMember({1, 2}));
    add_overrides(train);

    trajseg::InferOptions infer_opt;
    auto* infer = app.add_subcommand("infer", "Segment videos with a checkpoint");
    infer->add_option("--checkpoint", infer_opt.checkpoint, "Checkpoint path (default: config checkpoint)");
    auto* video_opt = infer->add_option("--video", infer_opt.video, "One video directory");
    infer->add_option("--split", infer_opt.split, "Every video of a dataset split")->excludes(video_opt);
    infer->add_option("--instruction", infer_opt.instruction,
                      "Instruction text (default: built from each video's manifest)");
    infer->add_option("--kf", infer_opt.key_frames, "Number of key frames")->check(CLI::PositiveNumber);
    infer->add_option("--out", infer_opt.output, "Output directory (default: config output)");
    add_overrides(infer);

    trajseg::EvalOptions eval_opt;
    auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
    eval->add_option("--pred", eval_opt.predictions, "Prediction directory (default: config output)");
    eval->add_option("--gt", eval_opt.ground_truth, "Ground-truth split directory (default: <dataset>/val)");
    eval->add_option("--out", eval_opt.output, "Report directory (default: the prediction directory)");
    eval->add_option("--buckets", eval_opt.bucket_edges, "Frame-count bucket edges")->delimiter(',');
    add_overrides(eval);

    std::string module;
    bool inject_fault = false;
    auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
    grad->add_option("--module", module, "Module name or 'all'")->required();
    grad->add_flag("--inject-fault", inject_fault)->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*grad) {
            const auto& mods = trajseg::grad_suite_modules();
            if (module != "all" && std::find(mods.begin(), mods.end(), module) == mods.end()) {
                std::string known = "all";
                for (const auto& m : mods) known += ", " + m;
                std::cerr << "error: unknown module '" << module << "' (expected one of: " << known << ")\n";
                return 2;
            }
            return trajseg::cmd_gradcheck(module, inject_fault, std::cout) ? 0 : 1;
        }
        trajseg::RunConfig config = build_config(g);
        if (*gen) {
            if (seed >= 0) config.data_seed = static_cast<std::uint64_t>(seed);
            trajseg::cmd_gen_data(config, force, std::cout);
        } else if (*train) {
            trajseg::cmd_train(config, stage, std::cout);
        } else if (*infer) {
            trajseg::cmd_infer(config, infer_opt, std::cout);
        } else if (*eval) {
            (void)trajseg::cmd_eval(config, eval_opt, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

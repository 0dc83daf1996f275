#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "trajseg/eval/metrics.hpp"
#include "trajseg/io/config.hpp"

namespace trajseg {

// The pipeline commands behind the trajseg executable. Every relative path
// (config fields and options alike) is resolved against config.root.

[[nodiscard]] std::string resolve_path(const RunConfig& config, const std::string& path);

/// Generates the train/val corpus into <root>/<dataset>.
void cmd_gen_data(const RunConfig& config, bool force, std::ostream& log);

/// Trains one stage on <root>/<dataset>/train, starting from
/// init_checkpoint when set. Writes the checkpoint and <checkpoint stem>.loss.csv.
void cmd_train(const RunConfig& config, int stage, std::ostream& log);

struct InferOptions {
    std::string checkpoint;   // empty: config.checkpoint
    std::string video;        // one video directory, or
    std::string split;        // every video of <root>/<dataset>/<split>
    std::string instruction;  // empty: grounding template from the video's manifest
    int key_frames = 0;       // 0: config.key_frames
    std::string output;       // empty: config.output
};

/// Writes <output>/<video>/mask_XXX.rle, presence.csv and response.txt.
void cmd_infer(const RunConfig& config, const InferOptions& options, std::ostream& log);

struct EvalOptions {
    std::string predictions;  // empty: config.output
    std::string ground_truth; // empty: <dataset>/val
    std::string output;       // empty: the predictions directory
    std::vector<int> bucket_edges = {1, 8, 16, 32, 64};
};

/// Scores every ground-truth video against its prediction directory and
/// writes report.csv, report.txt and buckets.csv.
MetricReport cmd_eval(const RunConfig& config, const EvalOptions& options, std::ostream& log);

/// Runs the gradient-check suite of one module ("all" for every module).
/// Returns true when every check passed. `inject_fault` doubles the analytic
/// gradients, which must make the suite fail.
bool cmd_gradcheck(const std::string& module, bool inject_fault, std::ostream& log);

}  // namespace trajseg

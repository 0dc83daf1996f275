#include <doctest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "trajseg/cli/commands.hpp"
#include "trajseg/data/dataset.hpp"
#include "trajseg/io/rle.hpp"

using namespace trajseg;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string tree_digest(const fs::path& root) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::string out;
    for (const auto& f : files) out += fs::relative(f, root).string() + "\n" + slurp(f);
    return out;
}

void write_masks(const fs::path& dir, const std::vector<Mask>& masks) {
    fs::create_directories(dir);
    for (std::size_t t = 0; t < masks.size(); ++t) write_rle((dir / mask_file_name(static_cast<int>(t))).string(), masks[t]);
}

std::string fmt4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

// Expected report.csv for the fixture, built from the oracle metrics only.
std::string oracle_report(const std::vector<std::pair<std::string, std::pair<std::vector<Mask>, std::vector<Mask>>>>& videos) {
    std::string out = "video,frames,J,F,JF,avg_iou_adjacent,t_iou_var\n";
    double sj = 0, sf = 0, sjf = 0, sa = 0, sv = 0;
    int nt = 0;
    for (const auto& [name, pg] : videos) {
        const auto& [pred, gt] = pg;
        const double j = oracle::jaccard(pred, gt), f = oracle::boundary_f(pred, gt), jf = (j + f) / 2;
        std::string adj, var;
        if (pred.size() > 1) {
            const auto t = oracle::temporal(pred, gt);
            adj = fmt4(t.adjacent);
            var = fmt4(t.variance);
            sa += t.adjacent;
            sv += t.variance;
            ++nt;
        }
        out += name + "," + std::to_string(pred.size()) + "," + fmt4(j) + "," + fmt4(f) + "," + fmt4(jf) + "," + adj + "," + var + "\n";
        sj += j;
        sf += f;
        sjf += jf;
    }
    const double n = static_cast<double>(videos.size());
    out += "mean,," + fmt4(sj / n) + "," + fmt4(sf / n) + "," + fmt4(sjf / n) + "," + fmt4(nt ? sa / nt : 0) + "," +
           fmt4(nt ? sv / nt : 0) + "\n";
    return out;
}

RunConfig pipeline_config(const fs::path& root) {
    RunConfig c = fixture::toy_training_config();
    c.root = root.string();
    c.train_videos = 2;
    c.val_videos = 2;
    c.max_steps = 2;
    return c;
}

}  // namespace

TEST_CASE("RLE text format") {
    Mask m(2, 3);
    m << 0, 1, 1, 1, 0, 0;
    CHECK(mask_runs(m) == std::vector<long long>{1, 3, 2});
    CHECK(encode_rle(m) == "RLE v1 2 3\n1 3 2\n");
    Mask ones = Mask::Ones(2, 2);
    CHECK(encode_rle(ones) == "RLE v1 2 2\n0 4\n");
    CHECK((decode_rle("RLE v1 2 3\n1 3 2\n") == m).all());
}

TEST_CASE("malformed RLE is rejected") {
    for (const char* bad : {"", "RLE v1 2 3\n", "RLE v2 2 3\n1 3 2\n", "RLE v1 2 3\n1 3 1\n", "RLE v1 2 3\n1 3 3\n",
                            "RLE v1 2 3\n1 x 2\n", "RLE v1 2 3\n1 3 2", "RLE v1 2 3\n1 3 2\n\n", "RLE v1 -2 3\n6\n",
                            "RLE v1 2 3\n1 -3 5\n"}) {
        INFO("input: " << bad);
        CHECK_THROWS_AS((void)decode_rle(bad), InputError);
    }
}

TEST_CASE("RLE round trip on random masks") {
    std::mt19937_64 rng(21);
    for (int i = 0; i < 2000; ++i) {
        const Mask m = fixture::random_shaped_mask(rng);
        const Mask back = decode_rle(encode_rle(m));
        REQUIRE(back.rows() == m.rows());
        REQUIRE(back.cols() == m.cols());
        CHECK((back == m).all());
    }
    fixture::TempDir dir("rle");
    const Mask m = oracle::random_mask(rng, 7, 9, 0.3);
    write_rle((dir.path() / "m.rle").string(), m);
    CHECK((read_rle((dir.path() / "m.rle").string()) == m).all());
    CHECK_THROWS_AS((void)read_rle((dir.path() / "missing.rle").string()), IoError);
}

TEST_CASE("config round trip and errors") {
    std::mt19937_64 rng(22);
    CHECK(parse_config(serialize_config(RunConfig{})) == RunConfig{});
    for (int i = 0; i < 500; ++i) {
        const RunConfig c = fixture::random_config(rng);
        CHECK(parse_config(serialize_config(c)) == c);
    }
    CHECK(parse_config("# comment\n\n channels = 32 # trailing\n").channels == 32);
    CHECK_THROWS_AS((void)parse_config("chanels = 32\n"), ConfigError);
    CHECK_THROWS_AS((void)parse_config("channels 32\n"), ConfigError);
    CHECK_THROWS_AS((void)parse_config("channels = 3x\n"), ConfigError);
    CHECK_THROWS_AS((void)parse_config("use_fci = maybe\n"), ConfigError);
    RunConfig c;
    apply_config_override(c, "learning_rate=0.5");
    CHECK(c.learning_rate == 0.5);
    CHECK_THROWS_AS(apply_config_override(c, "nope=1"), ConfigError);
    c.key_frames = c.frames + 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_THROWS_AS((void)load_config("/nonexistent/dir/cfg.txt"), IoError);
}

TEST_CASE("eval writes the oracle report") {
    fixture::TempDir dir("eval");
    std::mt19937_64 rng(23);
    std::vector<std::pair<std::string, std::pair<std::vector<Mask>, std::vector<Mask>>>> videos;
    for (const char* name : {"video_a", "video_b", "video_c"}) {
        const int frames = std::string(name) == "video_c" ? 1 : 4;
        std::vector<Mask> pred, gt;
        for (int t = 0; t < frames; ++t) {
            pred.push_back(oracle::random_blob(rng, 8, 8));
            gt.push_back(oracle::random_blob(rng, 8, 8));
        }
        write_masks(dir.path() / "gt" / name, gt);
        write_masks(dir.path() / "pred" / name, pred);
        videos.push_back({name, {pred, gt}});
    }
    RunConfig c;
    c.root = dir.str();
    EvalOptions opt;
    opt.predictions = "pred";
    opt.ground_truth = "gt";
    std::ostringstream log;
    (void)cmd_eval(c, opt, log);
    CHECK(slurp(dir.path() / "pred" / "report.csv") == oracle_report(videos));
    CHECK(slurp(dir.path() / "pred" / "buckets.csv") == "lo,hi,count,mean_jf\n1,8,3," +
                                                               fmt4((oracle::jaccard(videos[0].second.first, videos[0].second.second) +
                                                                     oracle::boundary_f(videos[0].second.first, videos[0].second.second) +
                                                                     oracle::jaccard(videos[1].second.first, videos[1].second.second) +
                                                                     oracle::boundary_f(videos[1].second.first, videos[1].second.second) +
                                                                     oracle::jaccard(videos[2].second.first, videos[2].second.second) +
                                                                     oracle::boundary_f(videos[2].second.first, videos[2].second.second)) /
                                                                    6) +
                                                               "\n8,16,0,absent\n16,32,0,absent\n32,64,0,absent\n");
    CHECK(log.str().find("J&F") != std::string::npos);
}

TEST_CASE("eval extremes and mismatches") {
    fixture::TempDir dir("eval2");
    std::mt19937_64 rng(24);
    std::vector<Mask> gt;
    for (int t = 0; t < 3; ++t) {
        Mask m = oracle::random_blob(rng, 16, 16);
        m(5, 5) = 1;  // never empty, so an empty prediction scores J = 0
        gt.push_back(m);
    }
    write_masks(dir.path() / "gt" / "v0", gt);
    write_masks(dir.path() / "same" / "v0", gt);
    write_masks(dir.path() / "empty" / "v0", std::vector<Mask>(3, Mask::Zero(16, 16)));
    write_masks(dir.path() / "short" / "v0", std::vector<Mask>(2, Mask::Zero(16, 16)));
    write_masks(dir.path() / "size" / "v0", std::vector<Mask>(3, Mask::Zero(8, 16)));
    RunConfig c;
    c.root = dir.str();
    std::ostringstream log;
    auto run = [&](const std::string& pred) {
        EvalOptions opt;
        opt.predictions = pred;
        opt.ground_truth = "gt";
        return cmd_eval(c, opt, log);
    };
    const MetricReport same = run("same");
    CHECK(same.j == 100.0);
    CHECK(same.f == 100.0);
    CHECK(same.avg_iou_adjacent == oracle::temporal(gt, gt).adjacent);
    CHECK(same.t_iou_var == 0.0);
    CHECK(run("empty").j == 0.0);
    CHECK_THROWS_WITH_AS((void)run("short"), doctest::Contains("v0"), InputError);
    CHECK_THROWS_WITH_AS((void)run("size"), doctest::Contains("v0"), InputError);
    CHECK_THROWS_WITH_AS((void)run("missing"), doctest::Contains("v0"), InputError);
}

TEST_CASE("gen-data is deterministic and refuses to overwrite") {
    fixture::TempDir a("gen_a"), b("gen_b");
    std::ostringstream log;
    cmd_gen_data(pipeline_config(a.path()), false, log);
    cmd_gen_data(pipeline_config(b.path()), false, log);
    CHECK(tree_digest(a.path() / "data") == tree_digest(b.path() / "data"));
    CHECK(fs::exists(a.path() / "data" / "vocab.txt"));
    CHECK_THROWS_AS(cmd_gen_data(pipeline_config(a.path()), false, log), IoError);
    cmd_gen_data(pipeline_config(a.path()), true, log);
    CHECK(tree_digest(a.path() / "data") == tree_digest(b.path() / "data"));

    fixture::TempDir c("gen_c");
    std::ofstream(c.path() / "file") << "x";
    RunConfig bad = pipeline_config(c.path());
    bad.dataset = "file";
    CHECK_THROWS_WITH_AS(cmd_gen_data(bad, true, log), doctest::Contains("file"), IoError);
}

TEST_CASE("gradcheck command") {
    std::ostringstream log;
    CHECK(cmd_gradcheck("fci", false, log));
    CHECK(log.str().find("operations passed") != std::string::npos);
    CHECK_FALSE(cmd_gradcheck("fci", true, log));
    CHECK_THROWS_AS((void)cmd_gradcheck("nonsense", false, log), InputError);
}

TEST_CASE("train and infer pipeline") {
    fixture::TempDir dir("pipeline");
    const RunConfig c = pipeline_config(dir.path());
    std::ostringstream log;
    CHECK_THROWS_AS(cmd_train(c, 2, log), ConfigError);
    cmd_gen_data(c, false, log);
    cmd_train(c, 2, log);
    CHECK(fs::exists(dir.path() / "model.ckpt"));
    CHECK(fs::exists(dir.path() / "model.loss.csv"));

    InferOptions opt;
    opt.split = "val";
    opt.output = "out1";
    cmd_infer(c, opt, log);
    opt.output = "out2";
    cmd_infer(c, opt, log);
    CHECK(tree_digest(dir.path() / "out1") == tree_digest(dir.path() / "out2"));
    const auto videos = read_split((dir.path() / "data").string(), "val");
    const fs::path first = dir.path() / "out1" / videos[0].name;
    CHECK(read_masks(first.string()).size() == static_cast<std::size_t>(videos[0].frame_count()));
    CHECK(slurp(first / "presence.csv").rfind("frame,presence\n", 0) == 0);
    CHECK(fs::exists(first / "response.txt"));

    EvalOptions eval;
    eval.predictions = "out1";
    const MetricReport report = cmd_eval(c, eval, log);
    CHECK(report.videos.size() == 2);

    opt.instruction = "Can you segment the zebra in this video?";
    CHECK_THROWS_AS(cmd_infer(c, opt, log), TokenizationError);
    opt.instruction.clear();
    opt.video = (dir.path() / "data" / "val" / videos[0].name).string();
    CHECK_THROWS_AS(cmd_infer(c, opt, log), Error);
}

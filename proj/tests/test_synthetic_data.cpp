#include <doctest.h>

#include <fstream>
#include <numbers>
#include <set>

#include "fixtures.hpp"
#include "trajseg/data/dataset.hpp"

using namespace trajseg;

namespace {

SceneSpec one_object(ObjectSpec o, int frames = 1) {
    SceneSpec s;
    s.frames = frames;
    s.objects = {o};
    s.target = 0;
    return s;
}

long long area(const Mask& m) { return static_cast<long long>(m.cast<int>().sum()); }

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string tree_digest(const std::filesystem::path& root) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::string out;
    for (const auto& f : files) out += std::filesystem::relative(f, root).string() + "\n" + slurp(f);
    return out;
}

}  // namespace

TEST_CASE("circle area is within one perimeter of pi r^2") {
    for (double r : {3.0, 4.5, 6.0, 8.25, 10.0}) {
        ObjectSpec o;
        o.size = r;
        o.x = 31.3;
        o.y = 30.7;
        const RenderedSample s = render_scene(one_object(o));
        const double ideal = std::numbers::pi * r * r;
        CHECK(std::abs(static_cast<double>(area(s.masks[0])) - ideal) <= 2 * std::numbers::pi * r);
    }
}

TEST_CASE("square covers exactly its pixel centers") {
    ObjectSpec o;
    o.shape = ShapeKind::square;
    o.size = 4;
    o.x = 20;
    o.y = 20;
    const RenderedSample s = render_scene(one_object(o));
    CHECK(area(s.masks[0]) == 64);
    CHECK(mask_box(s.masks[0]) == std::optional<Box>(Box{16.0 / 64, 16.0 / 64, 24.0 / 64, 24.0 / 64}));
}

TEST_CASE("presence follows entry and exit") {
    ObjectSpec o;
    o.entry = 2;
    o.exit = 5;
    const RenderedSample s = render_scene(one_object(o, 8));
    for (int t = 0; t < 8; ++t) {
        const int expect = (t >= 2 && t < 5) ? 1 : 0;
        CHECK(s.presence[static_cast<std::size_t>(t)] == expect);
        CHECK(s.masks[static_cast<std::size_t>(t)].any() == (expect == 1));
    }
    const ObjectTrajectory traj = s.trajectory();
    CHECK(traj.present_frames() == std::vector<int>{2, 3, 4});
}

TEST_CASE("linear motion moves the mask by the speed") {
    ObjectSpec o;
    o.shape = ShapeKind::square;
    o.size = 3;
    o.x = 10;
    o.y = 20;
    o.motion = MotionKind::linear;
    o.direction = Direction::right;
    o.speed = 2;
    const RenderedSample s = render_scene(one_object(o, 4));
    for (int t = 1; t < 4; ++t) {
        const Box a = *mask_box(s.masks[0]);
        const Box b = *mask_box(s.masks[static_cast<std::size_t>(t)]);
        CHECK(std::abs((b.x0 - a.x0) * 64 - 2.0 * t) < 1e-12);
        CHECK(b.y0 == a.y0);
    }
    CHECK(s.description == "red square moving right");
}

TEST_CASE("generation is deterministic in the seed") {
    const SceneConfig cfg;
    for (std::uint64_t seed : {0ULL, 1ULL, 99ULL, 123456789ULL}) {
        const RenderedSample a = generate_scene(cfg, seed);
        const RenderedSample b = generate_scene(cfg, seed);
        CHECK(a.spec == b.spec);
        CHECK(a.frames == b.frames);
        CHECK(a.description == b.description);
        for (std::size_t t = 0; t < a.masks.size(); ++t) CHECK((a.masks[t] == b.masks[t]).all());
    }
}

TEST_CASE("distinct seeds give distinct scenes") {
    const SceneConfig cfg;
    std::set<std::uint64_t> hashes;
    for (std::uint64_t seed = 0; seed < 2000; ++seed) hashes.insert(sample_scene_spec(cfg, seed).hash());
    CHECK(hashes.size() == 2000);
}

TEST_CASE("generated samples are self-consistent") {
    const SceneConfig cfg;
    const Vocabulary vocab = Vocabulary::synthetic();
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        const RenderedSample s = generate_scene(cfg, seed);
        REQUIRE(s.frame_count() == cfg.frames);
        bool any = false;
        for (int t = 0; t < s.frame_count(); ++t) {
            CHECK(s.presence[static_cast<std::size_t>(t)] == (s.masks[static_cast<std::size_t>(t)].any() ? 1 : 0));
            any = any || s.presence[static_cast<std::size_t>(t)] != 0;
        }
        CHECK(any);
        CHECK_NOTHROW((void)vocab.tokenize(grounding_instruction(s.description)));
        CHECK_NOTHROW((void)vocab.tokenize(response_text(s.description)));
        // No distractor shares the target's color and shape.
        const ObjectSpec& target = s.spec.objects[static_cast<std::size_t>(s.spec.target)];
        for (int i = 0; i < static_cast<int>(s.spec.objects.size()); ++i) {
            if (i == s.spec.target) continue;
            const ObjectSpec& d = s.spec.objects[static_cast<std::size_t>(i)];
            CHECK(describe_appearance(d) != describe_appearance(target));
        }
        for (const auto& d : s.distractors) CHECK(d.rfind(s.appearance + " ", 0) != 0);
    }
}

TEST_CASE("impossible distractor constraints raise GenerationError") {
    SceneConfig cfg;
    cfg.colors = 1;
    cfg.shapes = 1;
    cfg.min_objects = 2;
    cfg.max_objects = 2;
    CHECK_THROWS_AS((void)generate_scene(cfg, 1), GenerationError);
    cfg.colors = 0;
    CHECK_THROWS_AS((void)generate_scene(cfg, 1), InputError);
}

TEST_CASE("pseudo video without jitter repeats the still") {
    const RenderedSample still = generate_scene(SceneConfig{}, 5);
    PseudoVideoOptions opt;
    opt.frames = 4;
    const RenderedSample v = image_to_pseudo_video(still, 0, opt);
    REQUIRE(v.frame_count() == 4);
    for (int t = 0; t < 4; ++t) {
        CHECK(v.frames[static_cast<std::size_t>(t)] == still.frames[0]);
        CHECK((v.masks[static_cast<std::size_t>(t)] == still.masks[0]).all());
    }
    CHECK(v.description == still.description);
}

TEST_CASE("pseudo video drift shifts content and fills with background") {
    const RenderedSample still = generate_scene(SceneConfig{}, 6);
    PseudoVideoOptions opt;
    opt.frames = 3;
    opt.drift_x = 2;
    opt.drift_y = -1;
    const RenderedSample v = image_to_pseudo_video(still, 0, opt);
    const RgbImage& src = still.frames[0];
    for (int t = 0; t < 3; ++t) {
        const RgbImage& img = v.frames[static_cast<std::size_t>(t)];
        for (int y = 0; y < 64; ++y) {
            for (int x = 0; x < 64; ++x) {
                const int ys = y + t, xs = x - 2 * t;
                const bool inside = ys >= 0 && ys < 64 && xs >= 0 && xs < 64;
                for (int c = 0; c < 3; ++c) {
                    const std::uint8_t expect = inside ? src.pixel(ys, xs)[c] : still.spec.background[static_cast<std::size_t>(c)];
                    CHECK(img.pixel(y, x)[c] == expect);
                }
                CHECK(v.masks[static_cast<std::size_t>(t)](y, x) == (inside ? still.masks[0](ys, xs) : 0));
            }
        }
        CHECK(v.presence[static_cast<std::size_t>(t)] == (v.masks[static_cast<std::size_t>(t)].any() ? 1 : 0));
    }
    opt.random_amplitude = 2;
    opt.seed = 3;
    const RenderedSample a = image_to_pseudo_video(still, 0, opt);
    const RenderedSample b = image_to_pseudo_video(still, 0, opt);
    CHECK(a.frames == b.frames);
    CHECK_THROWS_AS((void)image_to_pseudo_video(still, 99, opt), InputError);
}

TEST_CASE("dataset write and read round trip") {
    fixture::TempDir dir("dataset");
    RunConfig c = fixture::toy_training_config();
    c.train_videos = 4;
    c.val_videos = 2;
    const Dataset data = generate_dataset(c);
    const std::string root = (dir.path() / "data").string();
    write_dataset(root, data, false);
    const auto train = read_split(root, "train");
    REQUIRE(train.size() == 4);
    for (std::size_t i = 0; i < train.size(); ++i) {
        CHECK(train[i].name == data.train[i].name);
        CHECK(train[i].kind == data.train[i].kind);
        CHECK(train[i].description == data.train[i].description);
        CHECK(train[i].frames == data.train[i].frames);
        CHECK(train[i].presence == data.train[i].presence);
        CHECK(train[i].key_frames == data.train[i].key_frames);
        for (std::size_t t = 0; t < train[i].masks.size(); ++t) CHECK((train[i].masks[t] == data.train[i].masks[t]).all());
    }
    CHECK(read_split(root, "val").size() == 2);
    CHECK_THROWS_AS(write_dataset(root, data, false), IoError);
    const std::string before = tree_digest(root);
    write_dataset(root, generate_dataset(c), true);
    CHECK(tree_digest(root) == before);
    CHECK_THROWS_AS((void)read_split(root, "test"), IoError);
}

TEST_CASE("dataset depends on the data seed only") {
    RunConfig c = fixture::toy_training_config();
    c.train_videos = 3;
    c.val_videos = 1;
    const Dataset a = generate_dataset(c);
    c.model_seed = 77;
    const Dataset b = generate_dataset(c);
    c.data_seed = 2;
    const Dataset d = generate_dataset(c);
    CHECK(a.train[0].frames == b.train[0].frames);
    CHECK(a.train[0].frames != d.train[0].frames);
    CHECK(video_seed(1, "train", 0) != video_seed(1, "val", 0));
}

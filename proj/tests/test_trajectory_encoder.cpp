#include <doctest.h>

#include "fixtures.hpp"
#include "trajseg/numerics/grad_suite.hpp"

using namespace trajseg;

namespace {

struct Encoder {
    RunConfig cfg = fixture::tiny_config();
    ParamStore<double> store;
    TrajectoryEncoder enc;

    explicit Encoder(std::uint64_t seed = 1, TrajectoryMode mode = TrajectoryMode::pooled) {
        cfg.traj_mode = mode;
        std::mt19937_64 rng(seed);
        enc = TrajectoryEncoder(ParamInit<double>(store, rng, ""), cfg);
    }

    const Mat<double>& w() const { return store[enc.linear().weight].value; }
    const Mat<double>& b() const { return store[enc.linear().bias].value; }
};

FrameFeatures<double> features(Graph<double>& g, const Mat<double>& patches, int grid) {
    FrameFeatures<double> f;
    f.grid_h = grid;
    f.grid_w = grid;
    f.patch = 2;
    f.patches = g.constant(patches);
    return f;
}

Mat<double> encode(const Encoder& e, const std::vector<Mat<double>>& maps, const ObjectTrajectory& traj) {
    Tape<double> t;
    Graph<double> g(t, e.store);
    std::vector<FrameFeatures<double>> fs;
    for (const auto& m : maps) fs.push_back(features(g, m, 4));
    return e.enc.encode(g, std::span<const FrameFeatures<double>>(fs), traj).value();
}

// y_j = sum_i x_i W(i, j) + b_j
Mat<double> linear_oracle(const Mat<double>& x, const Mat<double>& w, const Mat<double>& b) {
    Mat<double> y(1, w.cols());
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
        double s = b(0, j);
        for (Eigen::Index i = 0; i < w.rows(); ++i) s += x(0, i) * w(i, j);
        y(0, j) = s;
    }
    return y;
}

ObjectTrajectory trajectory(std::vector<std::optional<Box>> boxes) { return ObjectTrajectory{std::move(boxes)}; }

}  // namespace

TEST_CASE("zero features and zero bias encode to zero") {
    Encoder e;
    const auto traj = trajectory({Box{0.1, 0.1, 0.6, 0.7}, std::nullopt, Box{0.2, 0.3, 0.9, 0.8}, std::nullopt});
    const Mat<double> out = encode(e, std::vector<Mat<double>>(4, Mat<double>::Zero(16, 8)), traj);
    CHECK(out.rows() == 1);
    CHECK(out.cols() == 8);
    CHECK(out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single constant frame: linear map of [c, zero padding]") {
    Encoder e;
    std::mt19937_64 rng(2);
    const double c = 0.7;
    std::vector<Mat<double>> maps(4);
    for (auto& m : maps) m = oracle::random_matrix(rng, 16, 8);
    maps[1] = Mat<double>::Constant(16, 8, c);
    const auto traj = trajectory({std::nullopt, Box{0.1, 0.2, 0.8, 0.9}, std::nullopt, std::nullopt});
    Mat<double> x = Mat<double>::Zero(1, 3 * 8);
    x.leftCols(8).setConstant(c);
    const Mat<double> expect = linear_oracle(x, e.w(), e.b());
    CHECK((encode(e, maps, traj) - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("two identical present frames fill two slots with the same pooled vector") {
    Encoder e;
    std::mt19937_64 rng(3);
    const Mat<double> m = oracle::random_matrix(rng, 16, 8);
    const Box b{0.25, 0.25, 0.75, 0.75};
    const auto traj = trajectory({b, b, std::nullopt, std::nullopt});
    std::vector<Mat<double>> maps = {m, m, oracle::random_matrix(rng, 16, 8), oracle::random_matrix(rng, 16, 8)};
    // Box covers cells 1..2 in both directions; at P=2 the bin centers land on cell centers.
    Mat<double> pooled = Mat<double>::Zero(1, 8);
    for (int r = 1; r <= 2; ++r) {
        for (int q = 1; q <= 2; ++q) pooled += m.row(r * 4 + q) / 4.0;
    }
    Mat<double> x = Mat<double>::Zero(1, 24);
    x.block(0, 0, 1, 8) = pooled;
    x.block(0, 8, 1, 8) = pooled;
    CHECK((encode(e, maps, traj) - linear_oracle(x, e.w(), e.b())).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("values outside the boxed region do not matter") {
    Encoder e;
    std::mt19937_64 rng(4);
    const Box b{0.25, 0.25, 0.75, 0.75};
    const auto traj = trajectory({b, std::nullopt, b, b});
    std::vector<Mat<double>> maps(4);
    for (auto& m : maps) m = oracle::random_matrix(rng, 16, 8);
    const Mat<double> before = encode(e, maps, traj);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Mat<double>> noisy = maps;
        for (auto& m : noisy) {
            const Mat<double> r = oracle::random_matrix(rng, 16, 8, -5, 5);
            for (int cell = 0; cell < 16; ++cell) {
                const int y = cell / 4, x = cell % 4;
                if (y < 1 || y > 2 || x < 1 || x > 2) m.row(cell) = r.row(cell);
            }
        }
        noisy[1] = oracle::random_matrix(rng, 16, 8, -5, 5);  // absent frame: anything goes
        CHECK((encode(e, noisy, traj) - before).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("permuting absent frames leaves the encoding unchanged") {
    Encoder e;
    std::mt19937_64 rng(5);
    const auto traj = trajectory({std::nullopt, Box{0.1, 0.1, 0.5, 0.5}, std::nullopt, std::nullopt});
    std::vector<Mat<double>> maps(4);
    for (auto& m : maps) m = oracle::random_matrix(rng, 16, 8);
    const Mat<double> before = encode(e, maps, traj);
    std::swap(maps[0], maps[3]);
    std::swap(maps[2], maps[3]);
    CHECK((encode(e, maps, traj) - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("more present frames than slots are subsampled uniformly") {
    const ObjectTrajectory traj = trajectory(std::vector<std::optional<Box>>(10, Box{0, 0, 1, 1}));
    CHECK(trajectory_slot_frames(traj, 3) == std::vector<int>{0, 3, 6});
    CHECK(trajectory_slot_frames(traj, 10).size() == 10);
}

TEST_CASE("flatten mode keeps every ROI cell") {
    Encoder e(1, TrajectoryMode::flatten);
    CHECK(e.enc.slot_width() == 2 * 2 * 8);
    std::mt19937_64 rng(6);
    std::vector<Mat<double>> maps(4);
    for (auto& m : maps) m = oracle::random_matrix(rng, 16, 8);
    const Box b{0.25, 0.25, 0.75, 0.75};
    const auto traj = trajectory({b, std::nullopt, std::nullopt, std::nullopt});
    Mat<double> x = Mat<double>::Zero(1, 3 * 32);
    const Mat<double> roi = oracle::roi_align(maps[0], 4, 4, b, 2);
    for (int r = 0; r < 4; ++r) x.block(0, r * 8, 1, 8) = roi.row(r);
    CHECK((encode(e, maps, traj) - linear_oracle(x, e.w(), e.b())).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("encode_trajectory errors") {
    Encoder e;
    const std::vector<Mat<double>> maps(4, Mat<double>::Zero(16, 8));
    CHECK_THROWS_AS((void)encode(e, maps, trajectory(std::vector<std::optional<Box>>(4))), InputError);
    CHECK_THROWS_AS((void)encode(e, maps, trajectory({Box{0, 0, 1, 1}, std::nullopt})), ShapeError);
    CHECK_THROWS_AS((void)encode(e, maps, trajectory({Box{0, 0, 1.5, 1}, std::nullopt, std::nullopt, std::nullopt})),
                    InputError);
}

TEST_CASE("insert_placeholder only changes the slot") {
    std::mt19937_64 rng(7);
    Tape<double> t;
    const Mat<double> table_value = oracle::random_matrix(rng, 12, 5);
    Var<double> table = t.constant(table_value);
    const std::vector<int> ids = {5, 6, 7, Vocabulary::kPlaceholder, 8, 9, 10};
    const Mat<double> slot_value = oracle::random_matrix(rng, 1, 5);
    const Mat<double> out = insert_placeholder(std::span<const int>(ids), table, t.constant(slot_value)).value();
    REQUIRE(out.rows() == 7);
    for (int i = 0; i < 7; ++i) {
        if (i == 3) {
            CHECK((out.row(i) - slot_value).cwiseAbs().maxCoeff() == 0.0);
        } else {
            CHECK((out.row(i) - table_value.row(ids[static_cast<std::size_t>(i)])).cwiseAbs().maxCoeff() == 0.0);
        }
    }
    const std::vector<int> none = {5, 6};
    const std::vector<int> two = {4, 5, 4};
    CHECK_THROWS_AS((void)insert_placeholder(std::span<const int>(none), table, t.constant(slot_value)), InputError);
    CHECK_THROWS_AS((void)insert_placeholder(std::span<const int>(two), table, t.constant(slot_value)), InputError);
}

TEST_CASE("projector maps f_traj by its weight matrix") {
    Encoder e;
    std::mt19937_64 rng(8);
    Tape<double> t;
    Graph<double> g(t, e.store);
    const Mat<double> zero = e.enc.project(g, g.constant(Mat<double>::Zero(1, 8))).value();
    CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
    const Mat<double> f = oracle::random_matrix(rng, 1, 8);
    const Mat<double> out = e.enc.project(g, g.constant(f)).value();
    const auto& w = e.store[e.enc.projector().weight].value;
    const auto& b = e.store[e.enc.projector().bias].value;
    CHECK((out - linear_oracle(f, w, b)).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("trajectory encoder gradient suite passes") {
    for (const auto& r : run_grad_suite("trajectory_encoder")) {
        INFO(r.operation << " worst " << r.worst());
        CHECK(r.passed);
    }
}

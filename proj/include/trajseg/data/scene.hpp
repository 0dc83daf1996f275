#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "trajseg/model/vocabulary.hpp"

namespace trajseg {

/// Binary mask, row-major H x W, values 0 or 1.
using Mask = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// 8-bit RGB frame, interleaved row-major.
struct RgbImage {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> data;

    RgbImage() = default;
    RgbImage(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, 0) {}

    std::uint8_t* pixel(int y, int x) { return data.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    [[nodiscard]] const std::uint8_t* pixel(int y, int x) const {
        return data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
    [[nodiscard]] bool operator==(const RgbImage&) const = default;
};

enum class ShapeKind { circle, square, triangle };
enum class MotionKind { still, linear, sinusoidal };
enum class Direction { left, right, up, down };

struct ObjectSpec {
    ShapeKind shape = ShapeKind::circle;
    int color = 0;            // index into the palette
    double size = 6;          // radius / half side / circumradius, pixels
    double x = 32;            // center at frame 0, pixels
    double y = 32;
    MotionKind motion = MotionKind::still;
    Direction direction = Direction::right;
    double speed = 0;         // pixels per frame along direction
    double amplitude = 0;     // sinusoidal offset perpendicular to direction
    double period = 4;        // frames
    double phase = 0;
    int entry = 0;            // present for entry <= t < exit
    int exit = 1 << 20;

    [[nodiscard]] bool operator==(const ObjectSpec&) const = default;
};

struct SceneSpec {
    int height = 64;
    int width = 64;
    int frames = 10;
    std::uint64_t seed = 0;
    std::array<std::uint8_t, 3> background{30, 30, 30};
    std::vector<ObjectSpec> objects;  // drawn in order; the target is drawn last
    int target = 0;

    /// FNV-1a over a canonical text form of every field.
    [[nodiscard]] std::uint64_t hash() const;
    [[nodiscard]] bool operator==(const SceneSpec&) const = default;
};

struct SceneConfig {
    int height = 64;
    int width = 64;
    int frames = 10;
    int min_objects = 1;
    int max_objects = 3;
    int colors = 8;           // palette prefix available to the generator
    int shapes = 3;
    double min_size = 5;
    double max_size = 10;
    double min_speed = 1.0;
    double max_speed = 2.5;
    double exit_probability = 0.2;
    int max_retries = 64;
};

struct RenderedSample {
    SceneSpec spec;
    std::vector<RgbImage> frames;
    std::vector<Mask> masks;                 // target ground truth per frame
    std::vector<std::uint8_t> presence;      // 1 iff masks[t] is nonempty
    std::string description;                 // e.g. "red circle moving left"
    std::string appearance;                  // e.g. "red circle"
    std::vector<std::string> distractors;

    [[nodiscard]] int frame_count() const { return static_cast<int>(frames.size()); }
    /// Tight normalized boxes of the target per present frame.
    [[nodiscard]] ObjectTrajectory trajectory() const;
};

[[nodiscard]] const std::vector<std::string>& color_names();
[[nodiscard]] const std::array<std::uint8_t, 3>& color_rgb(int color);
[[nodiscard]] std::string shape_name(ShapeKind s);
/// Every word a scene description can contain.
[[nodiscard]] std::vector<std::string> scene_vocabulary();

[[nodiscard]] std::string describe(const ObjectSpec& o);
[[nodiscard]] std::string describe_appearance(const ObjectSpec& o);

/// Center of an object at frame t.
[[nodiscard]] std::array<double, 2> object_center(const ObjectSpec& o, int t);
/// Whether the pixel with center (px, py) lies inside the object at center (cx, cy).
[[nodiscard]] bool covers(const ObjectSpec& o, double cx, double cy, double px, double py);

[[nodiscard]] RenderedSample render_scene(const SceneSpec& spec);
[[nodiscard]] SceneSpec sample_scene_spec(const SceneConfig& config, std::uint64_t seed);
[[nodiscard]] RenderedSample generate_scene(const SceneConfig& config, std::uint64_t seed);

struct PseudoVideoOptions {
    int frames = 3;
    int drift_x = 0;          // deterministic shift per frame, pixels
    int drift_y = 0;
    int random_amplitude = 0; // extra seeded offset in [-a, a] per frame
    std::uint64_t seed = 0;
};

/// Replicates frame `source_frame` of `still` with per-frame integer
/// translations; masks move with the content and vacated pixels take the
/// background color.
[[nodiscard]] RenderedSample image_to_pseudo_video(const RenderedSample& still, int source_frame,
                                                   const PseudoVideoOptions& options);

/// Bounding box of the nonzero pixels, normalized; nullopt when empty.
[[nodiscard]] std::optional<Box> mask_box(const Mask& m);

}  // namespace trajseg

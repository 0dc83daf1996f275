#include "trajseg/data/scene.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace trajseg {

namespace {

const std::vector<std::array<std::uint8_t, 3>>& palette() {
    static const std::vector<std::array<std::uint8_t, 3>> p = {
        {230, 40, 40},   // red
        {40, 200, 60},   // green
        {50, 80, 230},   // blue
        {235, 220, 50},  // yellow
        {40, 210, 220},  // cyan
        {220, 50, 210},  // magenta
        {240, 240, 240}, // white
        {245, 140, 30},  // orange
    };
    return p;
}

std::string direction_name(Direction d) {
    switch (d) {
        case Direction::left: return "left";
        case Direction::right: return "right";
        case Direction::up: return "up";
        case Direction::down: return "down";
    }
    return "left";
}

std::array<double, 2> unit(Direction d) {
    switch (d) {
        case Direction::left: return {-1, 0};
        case Direction::right: return {1, 0};
        case Direction::up: return {0, -1};
        case Direction::down: return {0, 1};
    }
    return {0, 0};
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

bool present_at(const ObjectSpec& o, int t) { return t >= o.entry && t < o.exit; }

}  // namespace

const std::vector<std::string>& color_names() {
    static const std::vector<std::string> n = {"red", "green", "blue", "yellow", "cyan", "magenta", "white", "orange"};
    return n;
}

const std::array<std::uint8_t, 3>& color_rgb(int color) {
    return palette().at(static_cast<std::size_t>(color));
}

std::string shape_name(ShapeKind s) {
    switch (s) {
        case ShapeKind::circle: return "circle";
        case ShapeKind::square: return "square";
        case ShapeKind::triangle: return "triangle";
    }
    return "circle";
}

std::vector<std::string> scene_vocabulary() {
    std::vector<std::string> w = color_names();
    for (const char* s : {"circle", "square", "triangle", "moving", "wiggling", "staying", "still", "left", "right",
                          "up", "down"}) {
        w.emplace_back(s);
    }
    return w;
}

std::string describe_appearance(const ObjectSpec& o) {
    return color_names().at(static_cast<std::size_t>(o.color)) + " " + shape_name(o.shape);
}

std::string describe(const ObjectSpec& o) {
    std::string motion;
    switch (o.motion) {
        case MotionKind::still: motion = "staying still"; break;
        case MotionKind::linear: motion = "moving " + direction_name(o.direction); break;
        case MotionKind::sinusoidal: motion = "wiggling " + direction_name(o.direction); break;
    }
    return describe_appearance(o) + " " + motion;
}

std::array<double, 2> object_center(const ObjectSpec& o, int t) {
    const auto u = unit(o.direction);
    double cx = o.x;
    double cy = o.y;
    if (o.motion != MotionKind::still) {
        cx += u[0] * o.speed * t;
        cy += u[1] * o.speed * t;
    }
    if (o.motion == MotionKind::sinusoidal) {
        const double s = o.amplitude * std::sin(2 * std::numbers::pi * t / o.period + o.phase);
        cx += -u[1] * s;
        cy += u[0] * s;
    }
    return {cx, cy};
}

bool covers(const ObjectSpec& o, double cx, double cy, double px, double py) {
    const double dx = px - cx;
    const double dy = py - cy;
    const double r = o.size;
    switch (o.shape) {
        case ShapeKind::circle: return dx * dx + dy * dy <= r * r;
        case ShapeKind::square: return std::abs(dx) <= r && std::abs(dy) <= r;
        case ShapeKind::triangle: {
            // apex up: (0,-r), base corners (-r, r), (r, r)
            if (dy > r || dy < -r) return false;
            const double half = r * (dy + r) / (2 * r);
            return std::abs(dx) <= half;
        }
    }
    return false;
}

std::uint64_t SceneSpec::hash() const {
    std::string s;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%d %d %d %llu %d %d %d %d|", height, width, frames,
                  static_cast<unsigned long long>(seed), background[0], background[1], background[2], target);
    s += buf;
    for (const auto& o : objects) {
        std::snprintf(buf, sizeof buf, "%d %d %.17g %.17g %.17g %d %d %.17g %.17g %.17g %.17g %d %d|",
                      static_cast<int>(o.shape), o.color, o.size, o.x, o.y, static_cast<int>(o.motion),
                      static_cast<int>(o.direction), o.speed, o.amplitude, o.period, o.phase, o.entry, o.exit);
        s += buf;
    }
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

RenderedSample render_scene(const SceneSpec& spec) {
    if (spec.objects.empty()) throw InputError("scene has no objects");
    if (spec.target < 0 || spec.target >= static_cast<int>(spec.objects.size())) {
        throw InputError("scene target index out of range");
    }
    RenderedSample out;
    out.spec = spec;
    std::vector<int> order;
    for (int i = 0; i < static_cast<int>(spec.objects.size()); ++i) {
        if (i != spec.target) order.push_back(i);
    }
    order.push_back(spec.target);

    for (int t = 0; t < spec.frames; ++t) {
        RgbImage img(spec.height, spec.width);
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                std::uint8_t* p = img.pixel(y, x);
                p[0] = spec.background[0];
                p[1] = spec.background[1];
                p[2] = spec.background[2];
            }
        }
        Mask mask = Mask::Zero(spec.height, spec.width);
        for (int idx : order) {
            const ObjectSpec& o = spec.objects[static_cast<std::size_t>(idx)];
            if (!present_at(o, t)) continue;
            const auto c = object_center(o, t);
            const auto& rgb = color_rgb(o.color);
            const int y0 = std::max(0, static_cast<int>(std::floor(c[1] - o.size - 1)));
            const int y1 = std::min(spec.height - 1, static_cast<int>(std::ceil(c[1] + o.size + 1)));
            const int x0 = std::max(0, static_cast<int>(std::floor(c[0] - o.size - 1)));
            const int x1 = std::min(spec.width - 1, static_cast<int>(std::ceil(c[0] + o.size + 1)));
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    if (!covers(o, c[0], c[1], x + 0.5, y + 0.5)) continue;
                    std::uint8_t* p = img.pixel(y, x);
                    p[0] = rgb[0];
                    p[1] = rgb[1];
                    p[2] = rgb[2];
                    if (idx == spec.target) mask(y, x) = 1;
                }
            }
        }
        out.presence.push_back(mask.any() ? 1 : 0);
        out.masks.push_back(std::move(mask));
        out.frames.push_back(std::move(img));
    }
    const ObjectSpec& target = spec.objects[static_cast<std::size_t>(spec.target)];
    out.description = describe(target);
    out.appearance = describe_appearance(target);
    for (int i = 0; i < static_cast<int>(spec.objects.size()); ++i) {
        if (i != spec.target) out.distractors.push_back(describe(spec.objects[static_cast<std::size_t>(i)]));
    }
    return out;
}

SceneSpec sample_scene_spec(const SceneConfig& config, std::uint64_t seed) {
    if (config.colors < 1 || config.colors > static_cast<int>(palette().size()) || config.shapes < 1 ||
        config.shapes > 3) {
        throw InputError("scene config: palette or shape count out of range");
    }
    std::mt19937_64 rng(seed);
    SceneSpec spec;
    spec.height = config.height;
    spec.width = config.width;
    spec.frames = config.frames;
    spec.seed = seed;
    const int gray = uniform_int(rng, 15, 70);
    spec.background = {static_cast<std::uint8_t>(gray), static_cast<std::uint8_t>(gray),
                       static_cast<std::uint8_t>(gray)};

    auto sample_object = [&]() {
        ObjectSpec o;
        o.shape = static_cast<ShapeKind>(uniform_int(rng, 0, config.shapes - 1));
        o.color = uniform_int(rng, 0, config.colors - 1);
        o.size = uniform(rng, config.min_size, config.max_size);
        o.motion = static_cast<MotionKind>(uniform_int(rng, 0, 2));
        o.direction = static_cast<Direction>(uniform_int(rng, 0, 3));
        if (o.motion != MotionKind::still) o.speed = uniform(rng, config.min_speed, config.max_speed);
        if (o.motion == MotionKind::sinusoidal) {
            o.amplitude = uniform(rng, 2.0, 4.0);
            o.period = uniform(rng, 3.0, 6.0);
            o.phase = uniform(rng, 0.0, 2 * std::numbers::pi);
        }
        // Place the start so the path's center stays inside the canvas.
        const auto u = unit(o.direction);
        const double travel = o.speed * (config.frames - 1);
        const double margin = o.size;
        double xmin = margin, xmax = config.width - margin;
        double ymin = margin, ymax = config.height - margin;
        if (u[0] > 0) xmax -= travel;
        if (u[0] < 0) xmin += travel;
        if (u[1] > 0) ymax -= travel;
        if (u[1] < 0) ymin += travel;
        if (xmax < xmin) xmax = xmin = config.width / 2.0;
        if (ymax < ymin) ymax = ymin = config.height / 2.0;
        o.x = uniform(rng, xmin, xmax);
        o.y = uniform(rng, ymin, ymax);
        return o;
    };

    const int count = uniform_int(rng, config.min_objects, std::max(config.min_objects, config.max_objects));
    ObjectSpec target = sample_object();
    const double r = uniform(rng, 0.0, 1.0);
    if (config.frames >= 4 && r < config.exit_probability / 2) {
        target.exit = uniform_int(rng, config.frames / 2, config.frames - 1);
    } else if (config.frames >= 4 && r < config.exit_probability) {
        target.entry = uniform_int(rng, 1, config.frames / 2);
    }

    std::vector<ObjectSpec> distractors;
    for (int i = 1; i < count; ++i) {
        int tries = 0;
        ObjectSpec d = sample_object();
        // Distractors never share the target's color and shape, which keeps
        // the description unambiguous under any motion.
        while (d.shape == target.shape && d.color == target.color) {
            if (++tries > config.max_retries) {
                throw GenerationError("scene generation: cannot place a distinguishable distractor (seed " +
                                      std::to_string(seed) + ")");
            }
            d = sample_object();
        }
        distractors.push_back(d);
    }
    spec.objects = distractors;
    spec.objects.push_back(target);
    spec.target = static_cast<int>(spec.objects.size()) - 1;

    // The target must be visible at least once.
    const RenderedSample probe = render_scene(spec);
    bool any = false;
    for (auto p : probe.presence) any = any || p != 0;
    if (!any) {
        spec.objects.back().entry = 0;
        spec.objects.back().exit = 1 << 20;
    }
    return spec;
}

RenderedSample generate_scene(const SceneConfig& config, std::uint64_t seed) {
    return render_scene(sample_scene_spec(config, seed));
}

ObjectTrajectory RenderedSample::trajectory() const {
    ObjectTrajectory traj;
    for (const auto& m : masks) traj.boxes.push_back(mask_box(m));
    return traj;
}

std::optional<Box> mask_box(const Mask& m) {
    int x0 = static_cast<int>(m.cols()), y0 = static_cast<int>(m.rows()), x1 = -1, y1 = -1;
    for (int y = 0; y < m.rows(); ++y) {
        for (int x = 0; x < m.cols(); ++x) {
            if (m(y, x) == 0) continue;
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
        }
    }
    if (x1 < 0) return std::nullopt;
    const double w = static_cast<double>(m.cols());
    const double h = static_cast<double>(m.rows());
    return Box{x0 / w, y0 / h, (x1 + 1) / w, (y1 + 1) / h};
}

RenderedSample image_to_pseudo_video(const RenderedSample& still, int source_frame,
                                     const PseudoVideoOptions& options) {
    if (source_frame < 0 || source_frame >= still.frame_count()) throw InputError("pseudo video: bad source frame");
    if (options.frames < 1) throw InputError("pseudo video: frames must be >= 1");
    const RgbImage& src = still.frames[static_cast<std::size_t>(source_frame)];
    const Mask& src_mask = still.masks[static_cast<std::size_t>(source_frame)];
    const int h = src.height;
    const int w = src.width;
    std::mt19937_64 rng(options.seed);

    RenderedSample out;
    out.spec = still.spec;
    out.spec.frames = options.frames;
    out.description = still.description;
    out.appearance = still.appearance;
    out.distractors = still.distractors;
    for (int t = 0; t < options.frames; ++t) {
        int sx = options.drift_x * t;
        int sy = options.drift_y * t;
        if (options.random_amplitude > 0) {
            sx += uniform_int(rng, -options.random_amplitude, options.random_amplitude);
            sy += uniform_int(rng, -options.random_amplitude, options.random_amplitude);
        }
        RgbImage img(h, w);
        Mask mask = Mask::Zero(h, w);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const int ys = y - sy;
                const int xs = x - sx;
                std::uint8_t* p = img.pixel(y, x);
                if (ys >= 0 && ys < h && xs >= 0 && xs < w) {
                    const std::uint8_t* q = src.pixel(ys, xs);
                    p[0] = q[0];
                    p[1] = q[1];
                    p[2] = q[2];
                    mask(y, x) = src_mask(ys, xs);
                } else {
                    p[0] = still.spec.background[0];
                    p[1] = still.spec.background[1];
                    p[2] = still.spec.background[2];
                }
            }
        }
        out.presence.push_back(mask.any() ? 1 : 0);
        out.masks.push_back(std::move(mask));
        out.frames.push_back(std::move(img));
    }
    return out;
}

}  // namespace trajseg

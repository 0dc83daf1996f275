#include "trajseg/io/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <variant>

#include "trajseg/errors.hpp"

namespace trajseg {

namespace {

using FieldRef = std::variant<int*, double*, bool*, std::uint64_t*, std::string*, TrajectoryMode*>;

struct Field {
    const char* key;
    std::function<FieldRef(RunConfig&)> bind;
};

#define TRAJSEG_FIELD(name) Field{#name, [](RunConfig& c) -> FieldRef { return &c.name; }}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        TRAJSEG_FIELD(channels),
        TRAJSEG_FIELD(attn_dim),
        TRAJSEG_FIELD(patch),
        TRAJSEG_FIELD(roi_size),
        TRAJSEG_FIELD(traj_slots),
        TRAJSEG_FIELD(traj_mode),
        TRAJSEG_FIELD(pixel_channels),
        TRAJSEG_FIELD(pixel_skip),
        TRAJSEG_FIELD(decoder_pos_enc),
        TRAJSEG_FIELD(layers),
        TRAJSEG_FIELD(heads),
        TRAJSEG_FIELD(max_len),
        TRAJSEG_FIELD(mlp_ratio),
        TRAJSEG_FIELD(memory_capacity),
        TRAJSEG_FIELD(presence_threshold),
        TRAJSEG_FIELD(use_fci),
        TRAJSEG_FIELD(use_bialign),
        TRAJSEG_FIELD(frames),
        TRAJSEG_FIELD(key_frames),
        TRAJSEG_FIELD(height),
        TRAJSEG_FIELD(width),
        TRAJSEG_FIELD(train_videos),
        TRAJSEG_FIELD(val_videos),
        TRAJSEG_FIELD(max_objects),
        TRAJSEG_FIELD(exit_probability),
        TRAJSEG_FIELD(lambda_text),
        TRAJSEG_FIELD(lambda_mask),
        TRAJSEG_FIELD(lambda_bce),
        TRAJSEG_FIELD(lambda_dice),
        TRAJSEG_FIELD(lambda_cls),
        TRAJSEG_FIELD(learning_rate),
        TRAJSEG_FIELD(weight_decay),
        TRAJSEG_FIELD(beta1),
        TRAJSEG_FIELD(beta2),
        TRAJSEG_FIELD(adam_eps),
        TRAJSEG_FIELD(grad_clip),
        TRAJSEG_FIELD(batch_size),
        TRAJSEG_FIELD(stage1_epochs),
        TRAJSEG_FIELD(stage2_epochs),
        TRAJSEG_FIELD(max_steps),
        TRAJSEG_FIELD(stage1_frames),
        TRAJSEG_FIELD(pseudo_jitter),
        TRAJSEG_FIELD(tracking_fraction),
        TRAJSEG_FIELD(grounding_fraction),
        TRAJSEG_FIELD(captioning_fraction),
        TRAJSEG_FIELD(data_seed),
        TRAJSEG_FIELD(model_seed),
        TRAJSEG_FIELD(train_seed),
        TRAJSEG_FIELD(root),
        TRAJSEG_FIELD(dataset),
        TRAJSEG_FIELD(checkpoint),
        TRAJSEG_FIELD(init_checkpoint),
        TRAJSEG_FIELD(output),
        TRAJSEG_FIELD(threads),
    };
    return table;
}

#undef TRAJSEG_FIELD

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& v) {
    T out{};
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    if (v.empty()) throw ConfigError("config: empty value for " + key);
    char* endp = nullptr;
    const double d = std::strtod(v.c_str(), &endp);
    if (endp != v.c_str() + v.size() || !std::isfinite(d)) {
        throw ConfigError("config: bad number for " + key + ": '" + v + "'");
    }
    return d;
}

void assign(RunConfig& c, const std::string& key, const std::string& value) {
    for (const auto& f : fields()) {
        if (key != f.key) continue;
        FieldRef ref = f.bind(c);
        if (auto* p = std::get_if<int*>(&ref)) {
            **p = parse_integer<int>(key, value);
        } else if (auto* p = std::get_if<std::uint64_t*>(&ref)) {
            **p = parse_integer<std::uint64_t>(key, value);
        } else if (auto* p = std::get_if<double*>(&ref)) {
            **p = parse_double(key, value);
        } else if (auto* p = std::get_if<bool*>(&ref)) {
            if (value == "true") {
                **p = true;
            } else if (value == "false") {
                **p = false;
            } else {
                throw ConfigError("config: bad boolean for " + key + ": '" + value + "'");
            }
        } else if (auto* p = std::get_if<TrajectoryMode*>(&ref)) {
            if (value == "pooled") {
                **p = TrajectoryMode::pooled;
            } else if (value == "flatten") {
                **p = TrajectoryMode::flatten;
            } else {
                throw ConfigError("config: traj_mode must be pooled or flatten, got '" + value + "'");
            }
        } else if (auto* p = std::get_if<std::string*>(&ref)) {
            **p = value;
        }
        return;
    }
    throw ConfigError("config: unknown key '" + key + "'");
}

std::string format_double(double d) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    return buf;
}

}  // namespace

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& f : fields()) keys.emplace_back(f.key);
    return keys;
}

void apply_config_override(RunConfig& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("config: expected key=value, got '" + assignment + "'");
    assign(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunConfig parse_config(const std::string& text) {
    RunConfig c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.find('=') == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        }
        apply_config_override(c, line);
    }
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& config) {
    RunConfig c = config;
    std::string out;
    for (const auto& f : fields()) {
        FieldRef ref = f.bind(c);
        std::string value;
        if (auto* p = std::get_if<int*>(&ref)) {
            value = std::to_string(**p);
        } else if (auto* p = std::get_if<std::uint64_t*>(&ref)) {
            value = std::to_string(**p);
        } else if (auto* p = std::get_if<double*>(&ref)) {
            value = format_double(**p);
        } else if (auto* p = std::get_if<bool*>(&ref)) {
            value = **p ? "true" : "false";
        } else if (auto* p = std::get_if<TrajectoryMode*>(&ref)) {
            value = **p == TrajectoryMode::pooled ? "pooled" : "flatten";
        } else if (auto* p = std::get_if<std::string*>(&ref)) {
            const std::string& s = **p;
            if (s.find_first_of("#\n\r") != std::string::npos || trim(s) != s) {
                throw ConfigError("config: value of " + std::string(f.key) + " cannot be serialized");
            }
            value = s;
        }
        out += f.key;
        out += '=';
        out += value;
        out += '\n';
    }
    return out;
}

void RunConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError("config: " + what);
    };
    require(channels >= 1 && attn_dim >= 1, "channels and attn_dim must be positive");
    require(patch >= 1 && height % patch == 0 && width % patch == 0, "height and width must be multiples of patch");
    require(roi_size >= 1 && traj_slots >= 1, "roi_size and traj_slots must be positive");
    require(layers >= 1 && heads >= 1 && channels % heads == 0, "channels must divide evenly into heads");
    require(max_len >= 8, "max_len too small");
    require(memory_capacity >= 0, "memory_capacity must be >= 0");
    require(frames >= 1 && key_frames >= 1 && key_frames <= frames, "key_frames must be in [1, frames]");
    require(lambda_text >= 0 && lambda_mask >= 0 && lambda_bce >= 0 && lambda_dice >= 0 && lambda_cls >= 0,
            "loss weights must be >= 0");
    require(tracking_fraction >= 0 && grounding_fraction >= 0 && captioning_fraction >= 0 &&
                std::abs(tracking_fraction + grounding_fraction + captioning_fraction - 1.0) < 1e-9,
            "data-mix fractions must be nonnegative and sum to 1");
    require(batch_size >= 1, "batch_size must be positive");
    require(threads >= 0, "threads must be >= 0");
    require(max_objects >= 1, "max_objects must be >= 1");
}

}  // namespace trajseg

#include "trajseg/data/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "trajseg/errors.hpp"
#include "trajseg/io/rle.hpp"
#include "trajseg/model/trajseg_model.hpp"
#include "trajseg/training/mixing.hpp"

namespace fs = std::filesystem;

namespace trajseg {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::string indexed(const char* prefix, int i, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%03d%s", prefix, i, ext);
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("failed writing " + path);
}

}  // namespace

ObjectTrajectory VideoRecord::trajectory() const {
    ObjectTrajectory traj;
    for (const auto& m : masks) traj.boxes.push_back(mask_box(m));
    return traj;
}

VideoRecord to_record(const RenderedSample& sample, std::string name, SampleKind kind, std::vector<int> key_frames) {
    VideoRecord v;
    v.name = std::move(name);
    v.kind = kind;
    v.description = sample.description;
    v.appearance = sample.appearance;
    v.frames = sample.frames;
    v.masks = sample.masks;
    v.presence = sample.presence;
    v.key_frames = std::move(key_frames);
    v.background = sample.spec.background;
    return v;
}

RenderedSample still_sample(const VideoRecord& v, int frame) {
    if (frame < 0 || frame >= v.frame_count()) throw InputError("still_sample: frame out of range");
    RenderedSample s;
    s.spec.height = v.frames.front().height;
    s.spec.width = v.frames.front().width;
    s.spec.frames = 1;
    s.spec.background = v.background;
    s.description = v.description;
    s.appearance = v.appearance;
    s.frames.push_back(v.frames[static_cast<std::size_t>(frame)]);
    s.masks.push_back(v.masks[static_cast<std::size_t>(frame)]);
    s.presence.push_back(s.masks.back().any() ? 1 : 0);
    return s;
}

SceneConfig scene_config(const RunConfig& config) {
    SceneConfig sc;
    sc.height = config.height;
    sc.width = config.width;
    sc.frames = config.frames;
    sc.max_objects = config.max_objects;
    sc.exit_probability = config.exit_probability;
    return sc;
}

std::uint64_t video_seed(std::uint64_t data_seed, const std::string& split, int index) {
    const std::uint64_t salt = split == "train" ? 0x747261696eull : 0x76616cull;
    return splitmix64(splitmix64(data_seed ^ salt) + static_cast<std::uint64_t>(index));
}

Dataset generate_dataset(const RunConfig& config) {
    config.validate();
    const SceneConfig sc = scene_config(config);
    const std::vector<int> keys = uniform_key_frames(config.frames, config.key_frames);
    Dataset d;
    const DataMix mix{config.tracking_fraction, config.grounding_fraction, config.captioning_fraction};
    std::vector<SampleKind> kinds(static_cast<std::size_t>(config.train_videos), SampleKind::grounding);
    if (config.train_videos > 0) {
        for (const auto& s : mix_epoch(config.train_videos, mix, config.data_seed)) {
            kinds[static_cast<std::size_t>(s.video)] = s.kind;
        }
    }
    for (int i = 0; i < config.train_videos; ++i) {
        d.train.push_back(to_record(generate_scene(sc, video_seed(config.data_seed, "train", i)), indexed("video", i, ""),
                                    kinds[static_cast<std::size_t>(i)], keys));
    }
    for (int i = 0; i < config.val_videos; ++i) {
        d.val.push_back(to_record(generate_scene(sc, video_seed(config.data_seed, "val", i)), indexed("video", i, ""),
                                  SampleKind::grounding, keys));
    }
    return d;
}

void write_ppm(const std::string& path, const RgbImage& image) {
    std::string data = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
    data.append(reinterpret_cast<const char*>(image.data.data()), image.data.size());
    write_file(path, data);
}

RgbImage read_ppm(const std::string& path) {
    const std::string data = read_file(path);
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < data.size()) {
            if (data[pos] == '#') {
                while (pos < data.size() && data[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
        const std::size_t start = pos;
        while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
        return data.substr(start, pos - start);
    };
    if (token() != "P6") throw InputError(path + ": not a binary PPM (P6)");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(token());
        h = std::stoi(token());
        maxval = std::stoi(token());
    } catch (const std::exception&) {
        throw InputError(path + ": malformed PPM header");
    }
    if (w <= 0 || h <= 0 || maxval != 255) throw InputError(path + ": unsupported PPM dimensions or depth");
    ++pos;  // single whitespace after maxval
    const std::size_t bytes = static_cast<std::size_t>(w) * h * 3;
    if (data.size() - pos != bytes) throw InputError(path + ": PPM pixel data has the wrong size");
    RgbImage img(h, w);
    std::copy(data.begin() + static_cast<std::ptrdiff_t>(pos), data.end(), img.data.begin());
    return img;
}

std::string format_manifest(const VideoRecord& v) {
    std::string out = "kind=" + to_string(v.kind) + "\n";
    out += "description=" + v.description + "\n";
    out += "appearance=" + v.appearance + "\n";
    out += "presence=";
    for (auto p : v.presence) out += p != 0 ? '1' : '0';
    out += "\nkey_frames=";
    for (std::size_t i = 0; i < v.key_frames.size(); ++i) {
        if (i > 0) out += ' ';
        out += std::to_string(v.key_frames[i]);
    }
    out += "\nbackground=" + std::to_string(v.background[0]) + " " + std::to_string(v.background[1]) + " " +
           std::to_string(v.background[2]) + "\n";
    return out;
}

void write_video(const std::string& dir, const VideoRecord& v) {
    fs::create_directories(dir);
    for (int t = 0; t < v.frame_count(); ++t) {
        write_ppm((fs::path(dir) / indexed("frame", t, ".ppm")).string(), v.frames[static_cast<std::size_t>(t)]);
        write_rle((fs::path(dir) / indexed("mask", t, ".rle")).string(), v.masks[static_cast<std::size_t>(t)]);
    }
    write_file((fs::path(dir) / "manifest.txt").string(), format_manifest(v));
}

VideoRecord read_video(const std::string& dir) {
    VideoRecord v;
    v.name = fs::path(dir).filename().string();
    std::istringstream manifest(read_file((fs::path(dir) / "manifest.txt").string()));
    std::string line;
    std::string presence;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InputError(dir + "/manifest.txt: line without '=': " + line);
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "kind") {
            v.kind = parse_sample_kind(value);
        } else if (key == "description") {
            v.description = value;
        } else if (key == "appearance") {
            v.appearance = value;
        } else if (key == "presence") {
            presence = value;
        } else if (key == "key_frames") {
            std::istringstream ks(value);
            int k = 0;
            while (ks >> k) v.key_frames.push_back(k);
        } else if (key == "background") {
            std::istringstream bs(value);
            for (auto& c : v.background) {
                int x = -1;
                bs >> x;
                if (x < 0 || x > 255) throw InputError(dir + "/manifest.txt: bad background color");
                c = static_cast<std::uint8_t>(x);
            }
        } else {
            throw InputError(dir + "/manifest.txt: unknown key " + key);
        }
    }
    for (int t = 0;; ++t) {
        const fs::path frame = fs::path(dir) / indexed("frame", t, ".ppm");
        if (!fs::exists(frame)) break;
        v.frames.push_back(read_ppm(frame.string()));
        const fs::path mask = fs::path(dir) / indexed("mask", t, ".rle");
        if (fs::exists(mask)) v.masks.push_back(read_rle(mask.string()));
    }
    if (v.frames.empty()) throw InputError(dir + ": no frames");
    if (!v.masks.empty() && v.masks.size() != v.frames.size()) throw InputError(dir + ": mask count differs from frame count");
    for (char c : presence) {
        if (c != '0' && c != '1') throw InputError(dir + "/manifest.txt: presence must be a 0/1 string");
        v.presence.push_back(c == '1' ? 1 : 0);
    }
    if (!v.presence.empty() && v.presence.size() != v.frames.size()) {
        throw InputError(dir + "/manifest.txt: presence length differs from frame count");
    }
    return v;
}

std::vector<RgbImage> read_frames(const std::string& dir) {
    std::vector<RgbImage> frames;
    for (int t = 0;; ++t) {
        const fs::path frame = fs::path(dir) / indexed("frame", t, ".ppm");
        if (!fs::exists(frame)) break;
        frames.push_back(read_ppm(frame.string()));
    }
    if (frames.empty()) throw InputError(dir + ": no frames (expected frame_000.ppm, ...)");
    return frames;
}

std::vector<Mask> read_masks(const std::string& dir) {
    std::vector<Mask> masks;
    for (int t = 0;; ++t) {
        const fs::path mask = fs::path(dir) / indexed("mask", t, ".rle");
        if (!fs::exists(mask)) break;
        masks.push_back(read_rle(mask.string()));
    }
    return masks;
}

std::string mask_file_name(int frame) { return indexed("mask", frame, ".rle"); }

void write_dataset(const std::string& root, const Dataset& data, bool force) {
    std::error_code ec;
    if (fs::exists(root) && !fs::is_directory(root)) throw IoError("output path is not a directory: " + root);
    if (fs::exists(root) && !fs::is_empty(root)) {
        if (!force) throw IoError("output directory " + root + " is not empty (use --force to overwrite)");
        fs::remove_all(root, ec);
        if (ec) throw IoError("cannot clear " + root + ": " + ec.message());
    }
    fs::create_directories(root, ec);
    if (ec) throw IoError("cannot create " + root + ": " + ec.message());
    for (const auto& v : data.train) write_video((fs::path(root) / "train" / v.name).string(), v);
    for (const auto& v : data.val) write_video((fs::path(root) / "val" / v.name).string(), v);
}

std::vector<VideoRecord> read_split(const std::string& root, const std::string& split) {
    const fs::path dir = fs::path(root) / split;
    if (!fs::is_directory(dir)) throw IoError("dataset split not found: " + dir.string());
    std::vector<fs::path> entries;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_directory()) entries.push_back(e.path());
    }
    std::sort(entries.begin(), entries.end());
    std::vector<VideoRecord> out;
    for (const auto& p : entries) out.push_back(read_video(p.string()));
    return out;
}

}  // namespace trajseg

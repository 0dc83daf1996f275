#pragma once

#include <string>
#include <vector>

#include "trajseg/data/scene.hpp"
#include "trajseg/io/config.hpp"

namespace trajseg {

/// One video as stored on disk: frames, target masks and the manifest fields.
struct VideoRecord {
    std::string name;
    SampleKind kind = SampleKind::grounding;
    std::string description;  // full description, e.g. "red circle moving left"
    std::string appearance;   // color and shape only
    std::vector<RgbImage> frames;
    std::vector<Mask> masks;
    std::vector<std::uint8_t> presence;
    std::vector<int> key_frames;
    std::array<std::uint8_t, 3> background{0, 0, 0};

    [[nodiscard]] int frame_count() const { return static_cast<int>(frames.size()); }
    [[nodiscard]] ObjectTrajectory trajectory() const;
};

/// The still at `frame` as a one-frame rendered sample (for pseudo videos).
[[nodiscard]] RenderedSample still_sample(const VideoRecord& v, int frame);

[[nodiscard]] VideoRecord to_record(const RenderedSample& sample, std::string name, SampleKind kind,
                                    std::vector<int> key_frames);

struct Dataset {
    std::vector<VideoRecord> train;
    std::vector<VideoRecord> val;
};

[[nodiscard]] SceneConfig scene_config(const RunConfig& config);

/// Seed of video `index` in `split` ("train" or "val") derived from the data seed.
[[nodiscard]] std::uint64_t video_seed(std::uint64_t data_seed, const std::string& split, int index);

/// Deterministic train/val corpus. Training videos get kinds from one mixed
/// epoch; validation videos are grounding-style.
[[nodiscard]] Dataset generate_dataset(const RunConfig& config);

void write_ppm(const std::string& path, const RgbImage& image);
[[nodiscard]] RgbImage read_ppm(const std::string& path);

/// Manifest lines: kind, description, appearance, presence (0/1 string),
/// key_frames (space-separated indices), background (three 0-255 values).
[[nodiscard]] std::string format_manifest(const VideoRecord& v);

void write_video(const std::string& dir, const VideoRecord& v);
[[nodiscard]] VideoRecord read_video(const std::string& dir);

/// frame_000.ppm, frame_001.ppm, ... of a video directory; no manifest needed.
[[nodiscard]] std::vector<RgbImage> read_frames(const std::string& dir);
/// mask_000.rle, ... until the first missing index (possibly none).
[[nodiscard]] std::vector<Mask> read_masks(const std::string& dir);
[[nodiscard]] std::string mask_file_name(int frame);

/// Writes <root>/train/<name>/... and <root>/val/<name>/...; a non-empty
/// root is refused unless `force`.
void write_dataset(const std::string& root, const Dataset& data, bool force);
[[nodiscard]] std::vector<VideoRecord> read_split(const std::string& root, const std::string& split);

}  // namespace trajseg

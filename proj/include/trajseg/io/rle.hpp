#pragma once

#include <string>
#include <vector>

#include "trajseg/data/scene.hpp"

namespace trajseg {

/// Run lengths of a binary mask in row-major order, alternating and starting
/// with the number of leading zeros (which may be 0).
[[nodiscard]] std::vector<long long> mask_runs(const Mask& m);

/// Two LF-terminated lines: "RLE v1 H W" and the space-separated runs.
[[nodiscard]] std::string encode_rle(const Mask& m);

/// Strict inverse of encode_rle; malformed text throws InputError.
[[nodiscard]] Mask decode_rle(const std::string& text);

void write_rle(const std::string& path, const Mask& m);
[[nodiscard]] Mask read_rle(const std::string& path);

}  // namespace trajseg

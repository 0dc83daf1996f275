#pragma once

#include <string>

#include "trajseg/io/config.hpp"
#include "trajseg/numerics/autodiff.hpp"

namespace trajseg {

inline constexpr char kCheckpointMagic[8] = {'T', 'R', 'J', 'S', 'E', 'G', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout, little-endian: magic, u32 version, u32 config length,
/// config text, u32 block count, then per block u32 name length, name,
/// u32 ndim, u32 dims..., float32 values row-major.
void save_checkpoint(const std::string& path, const RunConfig& config, const ParamStore<float>& params);

struct Checkpoint {
    RunConfig config;
    ParamStore<float> params;
};

[[nodiscard]] Checkpoint load_checkpoint(const std::string& path);

/// Copies every block of `source` into the same-named, same-shaped parameter
/// of `target`. Missing or mismatched blocks throw ConfigError.
void assign_parameters(ParamStore<float>& target, const ParamStore<float>& source);

}  // namespace trajseg

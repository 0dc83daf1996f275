#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "trajseg/model/vocabulary.hpp"

namespace trajseg {

struct DataMix {
    double tracking = 0.2;
    double grounding = 0.4;
    double captioning = 0.4;

    /// Throws ConfigError unless all fractions are >= 0 and sum to 1.
    void validate() const;
};

struct ScheduledSample {
    int video = 0;
    SampleKind kind = SampleKind::grounding;

    [[nodiscard]] bool operator==(const ScheduledSample&) const = default;
};

/// Per-kind counts (tracking, grounding, captioning) for n samples by the
/// largest-remainder rule; ties go to the earlier kind.
[[nodiscard]] std::array<int, 3> mix_counts(int n, const DataMix& mix);

/// One epoch: every video once, kinds assigned by mix_counts to a seeded
/// random subset each, in seeded random order.
[[nodiscard]] std::vector<ScheduledSample> mix_epoch(int n, const DataMix& mix, std::uint64_t seed);

}  // namespace trajseg

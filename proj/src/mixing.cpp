#include "trajseg/training/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "trajseg/errors.hpp"

namespace trajseg {

void DataMix::validate() const {
    if (tracking < 0 || grounding < 0 || captioning < 0) throw ConfigError("data mix fractions must be nonnegative");
    if (std::abs(tracking + grounding + captioning - 1.0) > 1e-9) throw ConfigError("data mix fractions must sum to 1");
}

std::array<int, 3> mix_counts(int n, const DataMix& mix) {
    mix.validate();
    if (n < 0) throw InputError("negative sample count");
    const std::array<double, 3> fractions = {mix.tracking, mix.grounding, mix.captioning};
    std::array<int, 3> counts{};
    std::array<double, 3> remainder{};
    int assigned = 0;
    for (int k = 0; k < 3; ++k) {
        const double quota = fractions[k] * n;
        counts[k] = static_cast<int>(std::floor(quota + 1e-9));
        remainder[k] = quota - counts[k];
        assigned += counts[k];
    }
    std::array<int, 3> order = {0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return remainder[a] > remainder[b] + 1e-12; });
    for (int i = 0; assigned < n; ++i, ++assigned) ++counts[order[i % 3]];
    return counts;
}

std::vector<ScheduledSample> mix_epoch(int n, const DataMix& mix, std::uint64_t seed) {
    if (n <= 0) throw InputError("mix_epoch: empty dataset");
    const auto counts = mix_counts(n, mix);
    std::mt19937_64 rng(seed);
    std::vector<int> videos(static_cast<std::size_t>(n));
    std::iota(videos.begin(), videos.end(), 0);
    std::shuffle(videos.begin(), videos.end(), rng);
    const std::array<SampleKind, 3> kinds = {SampleKind::tracking, SampleKind::grounding, SampleKind::captioning};
    std::vector<ScheduledSample> out;
    out.reserve(videos.size());
    std::size_t next = 0;
    for (int k = 0; k < 3; ++k) {
        for (int i = 0; i < counts[k]; ++i) out.push_back({videos[next++], kinds[k]});
    }
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

}  // namespace trajseg

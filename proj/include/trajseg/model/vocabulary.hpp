#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "trajseg/numerics/kernels.hpp"

namespace trajseg {

/// Closed word-level vocabulary. The reserved tokens always occupy ids 0..4
/// in this order: <pad>, <bos>, <eos>, <TRJ>, <PLH>.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kTrj = 3;
    static constexpr int kPlaceholder = 4;
    static constexpr std::string_view kTrjText = "<TRJ>";
    static constexpr std::string_view kPlaceholderText = "<PLH>";

    /// Words after the reserved block; duplicates are rejected.
    explicit Vocabulary(const std::vector<std::string>& words);

    /// Vocabulary covering every description and template the synthetic
    /// generator can emit.
    [[nodiscard]] static Vocabulary synthetic();

    [[nodiscard]] static Vocabulary load(const std::string& path);
    void save(const std::string& path) const;

    [[nodiscard]] int size() const { return static_cast<int>(tokens_.size()); }
    [[nodiscard]] int id(const std::string& token) const;
    [[nodiscard]] std::optional<int> find(const std::string& token) const;
    [[nodiscard]] const std::string& token(int id) const;
    [[nodiscard]] const std::vector<std::string>& tokens() const { return tokens_; }

    /// Whitespace-separated words; trailing ',', '.' and '?' split into their
    /// own tokens. Unknown words throw TokenizationError.
    [[nodiscard]] std::vector<int> tokenize(std::string_view text) const;
    /// Inverse of tokenize on canonical text (single spaces, punctuation attached).
    [[nodiscard]] std::string detokenize(const std::vector<int>& ids) const;

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

enum class SampleKind { grounding, captioning, tracking };

[[nodiscard]] std::string to_string(SampleKind kind);
[[nodiscard]] SampleKind parse_sample_kind(const std::string& s);

/// Per-frame normalized boxes of one object, present exactly where a box exists.
struct ObjectTrajectory {
    std::vector<std::optional<Box>> boxes;

    [[nodiscard]] int frame_count() const { return static_cast<int>(boxes.size()); }
    [[nodiscard]] int present_count() const;
    [[nodiscard]] std::vector<int> present_frames() const;
    /// Throws InputError when no frame is present or a box is out of range.
    void validate() const;
};

struct Sample {
    SampleKind kind = SampleKind::grounding;
    std::vector<int> input_ids;
    std::vector<int> target_ids;
    std::string video;
    std::optional<ObjectTrajectory> trajectory;
    std::vector<int> key_frames;
};

[[nodiscard]] std::string grounding_instruction(const std::string& description);
[[nodiscard]] std::string captioning_instruction();
[[nodiscard]] std::string response_text(const std::string& description);

/// Builds a sample whose token streams follow the instruction templates.
/// Captioning requires a trajectory; tracking samples carry empty streams.
[[nodiscard]] Sample build_sample(const Vocabulary& vocab, SampleKind kind, const std::string& description,
                                  const std::string& video, std::optional<ObjectTrajectory> trajectory,
                                  std::vector<int> key_frames = {});

}  // namespace trajseg

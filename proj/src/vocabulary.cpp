#include "trajseg/model/vocabulary.hpp"

#include <fstream>
#include <sstream>

#include "trajseg/data/scene.hpp"

namespace trajseg {

namespace {

const std::vector<std::string>& reserved_tokens() {
    static const std::vector<std::string> r = {"<pad>", "<bos>", "<eos>", std::string(Vocabulary::kTrjText),
                                               std::string(Vocabulary::kPlaceholderText)};
    return r;
}

bool is_punct(char c) { return c == ',' || c == '.' || c == '?'; }

}  // namespace

Vocabulary::Vocabulary(const std::vector<std::string>& words) {
    tokens_ = reserved_tokens();
    for (const auto& w : words) tokens_.push_back(w);
    for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) {
        const auto& t = tokens_[static_cast<std::size_t>(i)];
        if (t.empty() || t.find_first_of(" \t\n\r") != std::string::npos) {
            throw InputError("vocabulary: invalid token '" + t + "'");
        }
        if (!index_.emplace(t, i).second) throw InputError("vocabulary: duplicate token '" + t + "'");
    }
}

Vocabulary Vocabulary::synthetic() {
    std::vector<std::string> words = {"Can", "you", "segment", "the", "in", "this", "video", "?",
                                      "describe", "Sure", ",", "."};
    for (const auto& w : scene_vocabulary()) words.push_back(w);
    return Vocabulary(words);
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open vocabulary file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    const auto& r = reserved_tokens();
    if (lines.size() < r.size()) throw InputError("vocabulary file too short: " + path);
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (lines[i] != r[i]) throw InputError("vocabulary file: reserved token " + r[i] + " missing at line " +
                                               std::to_string(i + 1));
    }
    return Vocabulary(std::vector<std::string>(lines.begin() + static_cast<std::ptrdiff_t>(r.size()), lines.end()));
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write vocabulary file: " + path);
    for (const auto& t : tokens_) out << t << '\n';
}

std::optional<int> Vocabulary::find(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

int Vocabulary::id(const std::string& token) const {
    auto f = find(token);
    if (!f) throw TokenizationError("out-of-vocabulary token '" + token + "'");
    return *f;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= size()) throw TokenizationError("token id out of range: " + std::to_string(id));
    return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::tokenize(std::string_view text) const {
    std::vector<int> ids;
    std::istringstream in{std::string(text)};
    std::string word;
    while (in >> word) {
        std::vector<std::string> trailing;
        while (word.size() > 1 && is_punct(word.back())) {
            trailing.emplace_back(1, word.back());
            word.pop_back();
        }
        ids.push_back(id(word));
        for (auto it = trailing.rbegin(); it != trailing.rend(); ++it) ids.push_back(id(*it));
    }
    return ids;
}

std::string Vocabulary::detokenize(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) {
        const std::string& t = token(id);
        if (!out.empty() && !(t.size() == 1 && is_punct(t[0]))) out += ' ';
        out += t;
    }
    return out;
}

std::string to_string(SampleKind kind) {
    switch (kind) {
        case SampleKind::grounding: return "grounding";
        case SampleKind::captioning: return "captioning";
        case SampleKind::tracking: return "tracking";
    }
    return "grounding";
}

SampleKind parse_sample_kind(const std::string& s) {
    if (s == "grounding") return SampleKind::grounding;
    if (s == "captioning") return SampleKind::captioning;
    if (s == "tracking") return SampleKind::tracking;
    throw InputError("unknown sample kind '" + s + "'");
}

int ObjectTrajectory::present_count() const {
    int n = 0;
    for (const auto& b : boxes) n += b.has_value() ? 1 : 0;
    return n;
}

std::vector<int> ObjectTrajectory::present_frames() const {
    std::vector<int> out;
    for (int t = 0; t < frame_count(); ++t) {
        if (boxes[static_cast<std::size_t>(t)]) out.push_back(t);
    }
    return out;
}

void ObjectTrajectory::validate() const {
    if (present_count() == 0) throw InputError("trajectory has no present frames");
    for (const auto& b : boxes) {
        if (!b) continue;
        if (!(0 <= b->x0 && b->x0 < b->x1 && b->x1 <= 1 && 0 <= b->y0 && b->y0 < b->y1 && b->y1 <= 1)) {
            throw InputError("trajectory box outside the unit square or degenerate");
        }
    }
}

std::string grounding_instruction(const std::string& description) {
    return "Can you segment the " + description + " in this video?";
}

std::string captioning_instruction() {
    return "Can you describe " + std::string(Vocabulary::kPlaceholderText) + " in this video?";
}

std::string response_text(const std::string& description) {
    return "Sure, " + description + " " + std::string(Vocabulary::kTrjText) + ".";
}

Sample build_sample(const Vocabulary& vocab, SampleKind kind, const std::string& description,
                    const std::string& video, std::optional<ObjectTrajectory> trajectory,
                    std::vector<int> key_frames) {
    Sample s;
    s.kind = kind;
    s.video = video;
    s.key_frames = std::move(key_frames);
    switch (kind) {
        case SampleKind::grounding:
            s.input_ids = vocab.tokenize(grounding_instruction(description));
            s.target_ids = vocab.tokenize(response_text(description));
            break;
        case SampleKind::captioning:
            if (!trajectory) throw InputError("captioning sample requires a trajectory");
            trajectory->validate();
            s.input_ids = vocab.tokenize(captioning_instruction());
            s.target_ids = vocab.tokenize(response_text(description));
            s.trajectory = std::move(trajectory);
            break;
        case SampleKind::tracking:
            break;
    }
    return s;
}

}  // namespace trajseg

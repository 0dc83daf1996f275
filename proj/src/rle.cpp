#include "trajseg/io/rle.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "trajseg/errors.hpp"

namespace trajseg {

namespace {

long long parse_count(std::string_view s, const char* what) {
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty() || v < 0) {
        throw InputError(std::string("RLE: bad ") + what + " '" + std::string(s) + "'");
    }
    return v;
}

std::vector<std::string_view> split_spaces(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i <= line.size()) {
        const std::size_t j = line.find(' ', i);
        const std::size_t end = j == std::string_view::npos ? line.size() : j;
        out.push_back(line.substr(i, end - i));
        if (j == std::string_view::npos) break;
        i = j + 1;
    }
    return out;
}

}  // namespace

std::vector<long long> mask_runs(const Mask& m) {
    std::vector<long long> runs;
    std::uint8_t current = 0;
    long long count = 0;
    for (Eigen::Index y = 0; y < m.rows(); ++y) {
        for (Eigen::Index x = 0; x < m.cols(); ++x) {
            const std::uint8_t v = m(y, x) != 0 ? 1 : 0;
            if (v != current) {
                runs.push_back(count);
                current = v;
                count = 0;
            }
            ++count;
        }
    }
    runs.push_back(count);
    return runs;
}

std::string encode_rle(const Mask& m) {
    std::string out = "RLE v1 " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
    const auto runs = mask_runs(m);
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (i > 0) out += ' ';
        out += std::to_string(runs[i]);
    }
    out += '\n';
    return out;
}

Mask decode_rle(const std::string& text) {
    const std::size_t nl1 = text.find('\n');
    if (nl1 == std::string::npos) throw InputError("RLE: missing header line");
    const std::size_t nl2 = text.find('\n', nl1 + 1);
    if (nl2 == std::string::npos || nl2 + 1 != text.size()) throw InputError("RLE: expected exactly two LF-terminated lines");
    const std::string_view header(text.data(), nl1);
    const std::string_view body(text.data() + nl1 + 1, nl2 - nl1 - 1);
    const auto h = split_spaces(header);
    if (h.size() != 4 || h[0] != "RLE" || h[1] != "v1") throw InputError("RLE: bad header '" + std::string(header) + "'");
    const long long rows = parse_count(h[2], "height");
    const long long cols = parse_count(h[3], "width");
    Mask m = Mask::Zero(rows, cols);
    long long pos = 0;
    std::uint8_t value = 0;
    for (std::string_view tok : split_spaces(body)) {
        const long long run = parse_count(tok, "run length");
        if (pos + run > rows * cols) throw InputError("RLE: runs exceed H*W");
        for (long long i = 0; i < run; ++i, ++pos) m(pos / cols, pos % cols) = value;
        value ^= 1;
    }
    if (pos != rows * cols) throw InputError("RLE: runs do not sum to H*W");
    return m;
}

void write_rle(const std::string& path, const Mask& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << encode_rle(m);
    if (!out) throw IoError("failed writing " + path);
}

Mask read_rle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return decode_rle(ss.str());
    } catch (const InputError& e) {
        throw InputError(path + ": " + e.what());
    }
}

}  // namespace trajseg

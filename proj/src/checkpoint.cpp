#include "trajseg/io/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "trajseg/errors.hpp"

namespace trajseg {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_bytes(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out += s;
}

class Reader {
public:
    Reader(const std::string& data, const std::string& path) : data_(data), path_(path) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    [[nodiscard]] bool done() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) throw IoError(path_ + ": truncated checkpoint");
    }

    const std::string& data_;
    const std::string& path_;
    std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const RunConfig& config, const ParamStore<float>& params) {
    std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
    put_u32(out, kCheckpointVersion);
    put_bytes(out, serialize_config(config));
    put_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        put_bytes(out, p.name);
        put_u32(out, 2);
        put_u32(out, static_cast<std::uint32_t>(p.value.rows()));
        put_u32(out, static_cast<std::uint32_t>(p.value.cols()));
        for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
            for (Eigen::Index c = 0; c < p.value.cols(); ++c) put_u32(out, std::bit_cast<std::uint32_t>(p.value(r, c)));
        }
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write checkpoint " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read checkpoint " + path);
    const std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r(data, path);
    if (r.bytes(sizeof(kCheckpointMagic)) != std::string(kCheckpointMagic, sizeof(kCheckpointMagic))) {
        throw IoError(path + ": not a checkpoint file");
    }
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    ck.config = parse_config(r.bytes(r.u32()));
    const std::uint32_t blocks = r.u32();
    for (std::uint32_t b = 0; b < blocks; ++b) {
        const std::string name = r.bytes(r.u32());
        const std::uint32_t ndim = r.u32();
        if (ndim != 2) throw IoError(path + ": block " + name + " has " + std::to_string(ndim) + " dims, expected 2");
        const std::uint32_t rows = r.u32();
        const std::uint32_t cols = r.u32();
        Parameter<float>& p = ck.params.add(name, rows, cols);
        for (std::uint32_t i = 0; i < rows; ++i) {
            for (std::uint32_t j = 0; j < cols; ++j) p.value(i, j) = std::bit_cast<float>(r.u32());
        }
    }
    if (!r.done()) throw IoError(path + ": trailing bytes after the last block");
    return ck;
}

void assign_parameters(ParamStore<float>& target, const ParamStore<float>& source) {
    if (source.size() != target.size()) {
        throw ConfigError("checkpoint has " + std::to_string(source.size()) + " blocks, model expects " +
                          std::to_string(target.size()));
    }
    for (auto& p : target) {
        if (!source.contains(p.name)) throw ConfigError("checkpoint lacks parameter " + p.name);
        const auto& s = source.at(p.name);
        if (s.value.rows() != p.value.rows() || s.value.cols() != p.value.cols()) {
            throw ConfigError("checkpoint parameter " + p.name + " has a different shape");
        }
        p.value = s.value;
    }
}

}  // namespace trajseg

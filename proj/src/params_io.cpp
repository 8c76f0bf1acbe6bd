// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#include "shopstage/params_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "shopstage/checksum.hpp"
#include "shopstage/error.hpp"

namespace shopstage {
namespace {

constexpr char kMagic[8] = {'S', 'H', 'S', 'T', 'P', 'R', 'M', '1'};

void put_u64(std::string& out, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    std::uint64_t u64() { return take(8); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
    std::string_view raw(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw Error(ErrorCode::BadFormat, "parameter file is truncated");
    }
    std::uint64_t take(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int b = 0; b < n; ++b) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::string serialize_params(const ModelParams& params) {
    const auto& c = params.config();
    std::string out(kMagic, sizeof kMagic);
    put_u32(out, kParamsFormatVersion);
    put_u32(out, 6);
    for (auto d : {c.hit_dim, c.session_dim, c.user_dim, c.hidden, c.fc_hidden, c.out_dim}) put_u64(out, d);
    put_u64(out, params.values().size());
    for (double v : params.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
    return out;
}

ModelParams deserialize_params(std::string_view bytes) {
    Reader r(bytes);
    if (r.raw(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic))
        throw Error(ErrorCode::BadFormat, "not a parameter file (bad magic)");
    const auto version = r.u32();
    if (version != kParamsFormatVersion)
        throw Error(ErrorCode::BadFormat, "unsupported parameter format version " + std::to_string(version));
    if (r.u32() != 6) throw Error(ErrorCode::BadFormat, "unexpected dimension field count");
    ModelConfig c;
    c.hit_dim = r.u64();
    c.session_dim = r.u64();
    c.user_dim = r.u64();
    c.hidden = r.u64();
    c.fc_hidden = r.u64();
    c.out_dim = r.u64();
    try {
        c.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::BadFormat, std::string("invalid stored config: ") + e.what());
    }
    const auto count = r.u64();
    if (count != parameter_count(c)) throw Error(ErrorCode::BadFormat, "parameter count does not match config");
    ModelParams p(c);
    for (auto& v : p.values()) v = std::bit_cast<double>(r.u64());
    if (!r.done()) throw Error(ErrorCode::BadFormat, "trailing bytes after parameters");
    return p;
}

std::string params_manifest(const ModelParams& params) {
    const auto& c = params.config();
    const auto bin = serialize_params(params);
    std::ostringstream out;
    out << "format_version " << kParamsFormatVersion << '\n';
    out << "config hit_dim=" << c.hit_dim << " session_dim=" << c.session_dim << " user_dim=" << c.user_dim
        << " hidden=" << c.hidden << " fc_hidden=" << c.fc_hidden << " out_dim=" << c.out_dim << '\n';
    out << "parameters " << params.values().size() << '\n';
    out << "checksum fnv1a64 " << hex64(fnv1a64(bin)) << '\n';
    for (const auto& t : params.layout()) {
        out << "tensor " << t.name << ' ' << t.rows << 'x' << t.cols << " offset " << t.offset << '\n';
    }
    return out.str();
}

void save_params(const ModelParams& params, const std::filesystem::path& stem) {
    auto write = [](const std::filesystem::path& path, const std::string& data) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
    };
    write(std::filesystem::path(stem.string() + ".bin"), serialize_params(params));
    write(std::filesystem::path(stem.string() + ".manifest.txt"), params_manifest(params));
}

ModelParams load_params(const std::filesystem::path& stem) {
    const std::filesystem::path path(stem.string() + ".bin");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_params(buf.str());
}

} // namespace shopstage

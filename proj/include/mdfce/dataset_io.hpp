// SPDX-License-Identifier: Apache-2.0
//
// mdfce: dual-band massive MIMO channel extrapolation toolkit
//
// Dataset file format (all integers little-endian):
//   bytes 0..3   magic "MDFC"
//   bytes 4..5   format version (u16, currently 1)
//   bytes 6..9   config text length (u32)
//   ...          SystemConfig as key=value text
//   u64          sample count
//   count x u64  per-sample seeds
//   payload      float32 pairs (real, imag), sample-major:
//                h_sub6 row-major, then h_mmwave row-major, per sample.

#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "mdfce/channel.hpp"
#include "mdfce/errors.hpp"

namespace mdfce {

namespace detail {

constexpr char kDatasetMagic[4] = {'M', 'D', 'F', 'C'};
constexpr uint16_t kDatasetVersion = 1;

inline void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>(v >> 8));
}

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::vector<uint8_t>& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct ByteReader {
    const uint8_t* p;
    size_t size;
    size_t pos = 0;

    void need(size_t n, const char* what) const {
        if (pos + n > size)
            throw FormatError(std::string("dataset: truncated while reading ") + what +
                              " at byte offset " + std::to_string(pos));
    }
    uint16_t u16(const char* what) {
        need(2, what);
        uint16_t v = static_cast<uint16_t>(p[pos]) | static_cast<uint16_t>(p[pos + 1]) << 8;
        pos += 2;
        return v;
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64(const char* what) {
        need(8, what);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    float f32(const char* what) {
        uint32_t bits = u32(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
};

inline void put_matrix_f32(std::vector<uint8_t>& out, const ComplexMatrix& m) {
    for (const cplx& z : m.v) {
        put_f32(out, static_cast<float>(z.real()));
        put_f32(out, static_cast<float>(z.imag()));
    }
}

inline void read_matrix_f32(ByteReader& r, ComplexMatrix& m, const char* what) {
    for (cplx& z : m.v) {
        const float re = r.f32(what);
        const float im = r.f32(what);
        z = cplx(re, im);
    }
}

inline std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open for reading: " + path);
    std::fseek(f, 0, SEEK_END);
    const long len = std::ftell(f);
    std::fseek(f, 0, SEEK_SET);
    std::vector<uint8_t> bytes(static_cast<size_t>(len < 0 ? 0 : len));
    if (!bytes.empty() && std::fread(bytes.data(), 1, bytes.size(), f) != bytes.size()) {
        std::fclose(f);
        throw IoError("short read: " + path);
    }
    std::fclose(f);
    return bytes;
}

// Write-to-temp-then-rename, so interrupted writes never leave a torn file.
inline void write_file_bytes_atomic(const std::string& path, const std::vector<uint8_t>& bytes) {
    const std::string tmp = path + ".tmp";
    std::FILE* f = std::fopen(tmp.c_str(), "wb");
    if (!f) throw IoError("cannot open for writing: " + tmp);
    if (!bytes.empty() && std::fwrite(bytes.data(), 1, bytes.size(), f) != bytes.size()) {
        std::fclose(f);
        std::remove(tmp.c_str());
        throw IoError("short write: " + tmp);
    }
    if (std::fclose(f) != 0) {
        std::remove(tmp.c_str());
        throw IoError("close failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw IoError("rename failed: " + tmp + " -> " + path);
    }
}

} // namespace detail

struct Dataset {
    SystemConfig config;
    std::vector<DualBandSample> samples;
};

inline void write_dataset(const SystemConfig& cfg, const std::vector<DualBandSample>& samples,
                          const std::string& path) {
    if (samples.empty()) throw ContractError("write_dataset: empty sample sequence");
    const DualBandSample& first = samples[0];
    for (const DualBandSample& s : samples)
        if (s.h_sub6.rows != first.h_sub6.rows || s.h_sub6.cols != first.h_sub6.cols ||
            s.h_mmwave.rows != first.h_mmwave.rows || s.h_mmwave.cols != first.h_mmwave.cols)
            throw ContractError("write_dataset: samples have non-uniform shapes");

    const std::string cfg_text = system_config_to_text(cfg);
    std::vector<uint8_t> out;
    out.reserve(64 + cfg_text.size() +
                samples.size() * (8 + 8 * (first.h_sub6.numel() + first.h_mmwave.numel())));
    out.insert(out.end(), detail::kDatasetMagic, detail::kDatasetMagic + 4);
    detail::put_u16(out, detail::kDatasetVersion);
    detail::put_u32(out, static_cast<uint32_t>(cfg_text.size()));
    out.insert(out.end(), cfg_text.begin(), cfg_text.end());
    detail::put_u64(out, samples.size());
    for (const DualBandSample& s : samples) detail::put_u64(out, s.seed);
    for (const DualBandSample& s : samples) {
        detail::put_matrix_f32(out, s.h_sub6);
        detail::put_matrix_f32(out, s.h_mmwave);
    }
    detail::write_file_bytes_atomic(path, out);
}

inline Dataset read_dataset(const std::string& path) {
    const std::vector<uint8_t> bytes = detail::read_file_bytes(path);
    detail::ByteReader r{bytes.data(), bytes.size()};

    r.need(4, "magic");
    if (std::memcmp(bytes.data(), detail::kDatasetMagic, 4) != 0)
        throw FormatError("dataset: bad magic at byte offset 0 in " + path);
    r.pos = 4;
    const uint16_t version = r.u16("version");
    if (version != detail::kDatasetVersion)
        throw FormatError("dataset: unsupported version " + std::to_string(version) +
                          " at byte offset 4 (expected " + std::to_string(detail::kDatasetVersion) +
                          ")");
    const uint32_t cfg_len = r.u32("config length");
    r.need(cfg_len, "config text");
    const std::string cfg_text(reinterpret_cast<const char*>(bytes.data() + r.pos), cfg_len);
    r.pos += cfg_len;

    Dataset ds;
    ds.config = system_config_from_text(cfg_text);
    const uint64_t count = r.u64("sample count");
    if (count == 0) throw FormatError("dataset: zero samples at byte offset " + std::to_string(r.pos));

    std::vector<uint64_t> seeds(count);
    for (uint64_t i = 0; i < count; ++i) seeds[i] = r.u64("sample seed");

    const int sb = ds.config.sub6.bs_antennas;
    const int sc = ds.config.sub6.ue_antennas * ds.config.sub6.subcarriers;
    const int mb = ds.config.mmwave.bs_antennas;
    const int mc = ds.config.mmwave.ue_antennas * ds.config.mmwave.subcarriers;
    ds.samples.resize(count);
    for (uint64_t i = 0; i < count; ++i) {
        DualBandSample& s = ds.samples[i];
        s.seed = seeds[i];
        s.h_sub6 = ComplexMatrix(sb, sc);
        s.h_mmwave = ComplexMatrix(mb, mc);
        detail::read_matrix_f32(r, s.h_sub6, "sub-6 payload");
        detail::read_matrix_f32(r, s.h_mmwave, "mmWave payload");
    }
    if (r.pos != bytes.size())
        throw FormatError("dataset: " + std::to_string(bytes.size() - r.pos) +
                          " trailing bytes at byte offset " + std::to_string(r.pos));
    return ds;
}

} // namespace mdfce

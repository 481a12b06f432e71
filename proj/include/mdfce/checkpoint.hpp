// SPDX-License-Identifier: Apache-2.0
//
// mdfce: dual-band massive MIMO channel extrapolation toolkit
//
// Model checkpoint format (all integers little-endian):
//   bytes 0..3   magic "MDCK"
//   bytes 4..5   format version (u16, currently 1)
//   bytes 6..9   manifest text length (u32)
//   ...          manifest text (see below)
//   payload      raw little-endian float64 records
//
// The manifest embeds the variant tag, ModelConfig, SystemConfig and a table
// mapping record names to shapes and byte offsets into the payload. The
// normalization statistics travel as ordinary named records. Files are
// written to a temp path and renamed, so an interrupted save never clobbers
// the previous checkpoint.

#pragma once

#include <cstdint>
#include <cstring>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mdfce/dataset_io.hpp"
#include "mdfce/model.hpp"

namespace mdfce {

namespace detail {

constexpr char kCheckpointMagic[4] = {'M', 'D', 'C', 'K'};
constexpr uint16_t kCheckpointVersion = 1;

inline void put_f64(std::vector<uint8_t>& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

struct RecordInfo {
    Shape shape;
    size_t offset = 0; // bytes into payload
    size_t count = 0;
};

} // namespace detail

inline std::string model_config_to_text(const ModelConfig& cfg) {
    std::ostringstream os;
    os << "d_re=" << cfg.d_re << "\nd_hid=" << cfg.d_hid << "\nn_experts=" << cfg.n_experts
       << "\ntop_k=" << cfg.top_k << "\nn_heads=" << cfg.n_heads << "\nn_blocks=" << cfg.n_blocks
       << "\n";
    return os.str();
}

inline ModelConfig model_config_from_text(const std::string& text, const SystemConfig& sys) {
    std::map<std::string, int> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        const size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = std::stoi(line.substr(eq + 1));
    }
    auto get = [&](const std::string& k) {
        auto it = kv.find(k);
        if (it == kv.end()) throw FormatError("ModelConfig text: missing key " + k);
        return it->second;
    };
    ModelConfig cfg;
    cfg.d_re = get("d_re");
    cfg.d_hid = get("d_hid");
    cfg.n_experts = get("n_experts");
    cfg.top_k = get("top_k");
    cfg.n_heads = get("n_heads");
    cfg.n_blocks = get("n_blocks");
    cfg.adopt_geometry(sys);
    return cfg;
}

inline void save_checkpoint(MdfceModel& model, const std::string& path) {
    std::vector<uint8_t> payload;
    std::ostringstream table;

    auto add_record = [&](const std::string& name, const Shape& shape,
                          const std::vector<double>& values) {
        table << "record " << name << " " << shape_str(shape) << " " << payload.size() << " "
              << values.size() << "\n";
        for (double v : values) detail::put_f64(payload, v);
    };
    for (auto& p : model.parameters()) add_record(p.name, p.tensor.shape(), p.tensor.values());
    const int fin = model.cfg.feat_in(), fout = model.cfg.feat_out();
    add_record("norm.input_mean", {fin}, model.norm.input_mean);
    add_record("norm.input_std", {fin}, model.norm.input_std);
    add_record("norm.target_mean", {fout}, model.norm.target_mean);
    add_record("norm.target_std", {fout}, model.norm.target_std);

    std::ostringstream manifest;
    manifest << "variant=" << (model.no_tfem ? "no_tfem" : "full") << "\n";
    manifest << "[model]\n" << model_config_to_text(model.cfg);
    manifest << "[system]\n" << system_config_to_text(model.sys);
    manifest << "[records]\n" << table.str();
    const std::string mtext = manifest.str();

    std::vector<uint8_t> out;
    out.reserve(16 + mtext.size() + payload.size());
    out.insert(out.end(), detail::kCheckpointMagic, detail::kCheckpointMagic + 4);
    detail::put_u16(out, detail::kCheckpointVersion);
    detail::put_u32(out, static_cast<uint32_t>(mtext.size()));
    out.insert(out.end(), mtext.begin(), mtext.end());
    out.insert(out.end(), payload.begin(), payload.end());
    detail::write_file_bytes_atomic(path, out);
}

inline MdfceModel load_checkpoint(const std::string& path) {
    const std::vector<uint8_t> bytes = detail::read_file_bytes(path);
    detail::ByteReader r{bytes.data(), bytes.size()};
    r.need(4, "magic");
    if (std::memcmp(bytes.data(), detail::kCheckpointMagic, 4) != 0)
        throw FormatError("checkpoint: bad magic at byte offset 0 in " + path);
    r.pos = 4;
    const uint16_t version = r.u16("version");
    if (version != detail::kCheckpointVersion)
        throw FormatError("checkpoint: unsupported version " + std::to_string(version) +
                          " (expected " + std::to_string(detail::kCheckpointVersion) + ")");
    const uint32_t mlen = r.u32("manifest length");
    r.need(mlen, "manifest");
    const std::string mtext(reinterpret_cast<const char*>(bytes.data() + r.pos), mlen);
    r.pos += mlen;
    const size_t payload_base = r.pos;

    // Parse the manifest sections.
    std::string variant = "full", model_text, system_text;
    std::map<std::string, detail::RecordInfo> records;
    {
        std::istringstream is(mtext);
        std::string line, section;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            if (line.front() == '[') {
                section = line;
                continue;
            }
            if (section.empty() && line.rfind("variant=", 0) == 0) {
                variant = line.substr(8);
            } else if (section == "[model]") {
                model_text += line + "\n";
            } else if (section == "[system]") {
                system_text += line + "\n";
            } else if (section == "[records]") {
                std::istringstream ls(line);
                std::string tag, name, shape_text;
                size_t offset = 0, count = 0;
                ls >> tag >> name >> shape_text >> offset >> count;
                if (tag != "record" || !ls)
                    throw FormatError("checkpoint: malformed record line '" + line + "'");
                detail::RecordInfo info;
                info.offset = offset;
                info.count = count;
                // shape_text like [4x8]
                std::string dims = shape_text.substr(1, shape_text.size() - 2);
                size_t pos = 0;
                while (pos < dims.size()) {
                    size_t x = dims.find('x', pos);
                    if (x == std::string::npos) x = dims.size();
                    info.shape.push_back(std::stoi(dims.substr(pos, x - pos)));
                    pos = x + 1;
                }
                records[name] = info;
            }
        }
    }

    const SystemConfig sys = system_config_from_text(system_text);
    const ModelConfig cfg = model_config_from_text(model_text, sys);
    MdfceModel model = MdfceModel::init(cfg, sys, 0);
    model.no_tfem = (variant == "no_tfem");

    auto read_record = [&](const std::string& name, std::vector<double>& dst, size_t expect) {
        auto it = records.find(name);
        if (it == records.end()) throw FormatError("checkpoint: missing record " + name);
        if (it->second.count != expect)
            throw FormatError("checkpoint: record " + name + " has " +
                              std::to_string(it->second.count) + " values, expected " +
                              std::to_string(expect));
        const size_t byte_off = payload_base + it->second.offset;
        if (byte_off + 8 * expect > bytes.size())
            throw FormatError("checkpoint: truncated payload for record " + name +
                              " at byte offset " + std::to_string(byte_off));
        dst.resize(expect);
        for (size_t i = 0; i < expect; ++i) {
            uint64_t bits = 0;
            for (int b = 0; b < 8; ++b)
                bits |= static_cast<uint64_t>(bytes[byte_off + 8 * i + b]) << (8 * b);
            double v;
            std::memcpy(&v, &bits, 8);
            dst[i] = v;
        }
    };
    for (auto& p : model.parameters()) read_record(p.name, p.tensor.values(), p.tensor.numel());
    read_record("norm.input_mean", model.norm.input_mean, cfg.feat_in());
    read_record("norm.input_std", model.norm.input_std, cfg.feat_in());
    read_record("norm.target_mean", model.norm.target_mean, cfg.feat_out());
    read_record("norm.target_std", model.norm.target_std, cfg.feat_out());
    return model;
}

} // namespace mdfce

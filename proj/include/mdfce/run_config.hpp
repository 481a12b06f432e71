// SPDX-License-Identifier: Apache-2.0
//
// mdfce: dual-band massive MIMO channel extrapolation toolkit
//
// Flat text run configuration: `key=value` lines under `[section]` headers.
// Round-trips losslessly so experiment records stay diff-able.

#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mdfce/baseline.hpp"
#include "mdfce/channel.hpp"
#include "mdfce/checkpoint.hpp"
#include "mdfce/model.hpp"
#include "mdfce/train.hpp"

namespace mdfce {

struct RunConfig {
    SystemConfig system = SystemConfig::defaults();
    ModelConfig model;  // geometry adopted from `system` on load
    TrainConfig train;
    Rational pd_sub6{1, 1};          // sub-6 pilot density (overhead accounting)
    std::vector<Rational> pd_mmwave; // LS baseline densities for eval
    std::string train_dataset;
    std::string val_dataset;
    std::string out_dir = ".";
    uint64_t seed = 0;
    bool deterministic = false;
    int threads = 1;

    void finalize() {
        model.adopt_geometry(system);
        model.validate();
        train.seed = seed;
        train.threads = deterministic ? 1 : threads;
    }
};

namespace detail {

using KvSections = std::map<std::string, std::map<std::string, std::string>>;

inline KvSections parse_sections(const std::string& text) {
    KvSections out;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        line = line.substr(start);
        if (line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw FormatError("config line " + std::to_string(lineno) + ": malformed section");
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError("config line " + std::to_string(lineno) + ": expected key=value");
        out[section][line.substr(0, eq)] = line.substr(eq + 1);
    }
    return out;
}

inline std::string fmt_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::stod(s);
}

} // namespace detail

inline std::string run_config_to_text(const RunConfig& cfg) {
    std::ostringstream os;
    os << "[system]\n" << system_config_to_text(cfg.system);
    os << "[model]\n" << model_config_to_text(cfg.model);
    os << "[train]\n";
    os << "target_lr=" << detail::fmt_double(cfg.train.target_lr) << "\n";
    os << "epochs=" << cfg.train.epochs << "\n";
    os << "batch_size=" << cfg.train.batch_size << "\n";
    os << "kappa=" << detail::fmt_double(cfg.train.kappa) << "\n";
    os << "warmup_fraction=" << detail::fmt_double(cfg.train.warmup_fraction) << "\n";
    os << "snr_db_train=" << detail::fmt_double(cfg.train.snr_db_train) << "\n";
    os << "[pilot]\n";
    os << "pd_sub6=" << cfg.pd_sub6.str() << "\n";
    if (!cfg.pd_mmwave.empty()) {
        os << "pd_mmwave=";
        for (size_t i = 0; i < cfg.pd_mmwave.size(); ++i)
            os << (i ? "," : "") << cfg.pd_mmwave[i].str();
        os << "\n";
    }
    os << "[run]\n";
    os << "train_dataset=" << cfg.train_dataset << "\n";
    os << "val_dataset=" << cfg.val_dataset << "\n";
    os << "out_dir=" << cfg.out_dir << "\n";
    os << "seed=" << cfg.seed << "\n";
    os << "deterministic=" << (cfg.deterministic ? 1 : 0) << "\n";
    os << "threads=" << cfg.threads << "\n";
    return os.str();
}

inline RunConfig run_config_from_text(const std::string& text) {
    const auto sections = detail::parse_sections(text);
    RunConfig cfg;

    auto get = [&](const std::string& sec, const std::string& key,
                   const std::string& fallback) -> std::string {
        auto s = sections.find(sec);
        if (s == sections.end()) return fallback;
        auto k = s->second.find(key);
        return k == s->second.end() ? fallback : k->second;
    };

    {
        std::string sys_text;
        auto s = sections.find("system");
        if (s != sections.end())
            for (const auto& [k, v] : s->second) sys_text += k + "=" + v + "\n";
        if (!sys_text.empty()) cfg.system = system_config_from_text(sys_text);
    }
    cfg.model.d_re = std::stoi(get("model", "d_re", "128"));
    cfg.model.d_hid = std::stoi(get("model", "d_hid", "256"));
    cfg.model.n_experts = std::stoi(get("model", "n_experts", "8"));
    cfg.model.top_k = std::stoi(get("model", "top_k", "2"));
    cfg.model.n_heads = std::stoi(get("model", "n_heads", "4"));
    cfg.model.n_blocks = std::stoi(get("model", "n_blocks", "7"));

    cfg.train.target_lr = detail::parse_double(get("train", "target_lr", "1e-4"));
    cfg.train.epochs = std::stoi(get("train", "epochs", "1000"));
    cfg.train.batch_size = std::stoi(get("train", "batch_size", "128"));
    cfg.train.kappa = detail::parse_double(get("train", "kappa", "0.99"));
    cfg.train.warmup_fraction = detail::parse_double(get("train", "warmup_fraction", "0.05"));
    cfg.train.snr_db_train = detail::parse_double(get("train", "snr_db_train", "inf"));

    cfg.pd_sub6 = Rational::parse(get("pilot", "pd_sub6", "1"));
    {
        auto s = sections.find("pilot");
        if (s != sections.end()) {
            // Sections are key-unique; multiple densities come comma-separated.
            auto k = s->second.find("pd_mmwave");
            if (k != s->second.end()) {
                std::istringstream is(k->second);
                std::string item;
                while (std::getline(is, item, ','))
                    if (!item.empty()) cfg.pd_mmwave.push_back(Rational::parse(item));
            }
        }
    }

    cfg.train_dataset = get("run", "train_dataset", "");
    cfg.val_dataset = get("run", "val_dataset", "");
    cfg.out_dir = get("run", "out_dir", ".");
    cfg.seed = std::stoull(get("run", "seed", "0"));
    cfg.deterministic = get("run", "deterministic", "0") != "0";
    cfg.threads = std::stoi(get("run", "threads", "1"));
    cfg.finalize();
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return run_config_from_text(ss.str());
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

} // namespace mdfce

// SPDX-License-Identifier: Apache-2.0
//
// mdfce: dual-band massive MIMO channel extrapolation toolkit
//
// NMSE-versus-SNR evaluation harness. A Method wraps any mmWave estimator
// (the extrapolator, the LS baseline, oracles in tests) together with its
// pilot-overhead and FLOPs accounting; evaluate() produces one report row
// per (method, SNR) pair.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "mdfce/baseline.hpp"
#include "mdfce/channel.hpp"
#include "mdfce/flops.hpp"
#include "mdfce/losses.hpp"
#include "mdfce/model.hpp"
#include "mdfce/train.hpp"

namespace mdfce {

struct EvalRow {
    double snr_db = 0.0;
    std::string method;
    double nmse_linear = 0.0;
    double nmse_db = 0.0; // floored at kNmseDbFloor
    long long pilot_overhead = 0;
    long long flops_per_sample = 0;
};

using EvalReport = std::vector<EvalRow>;

struct Method {
    std::string name;
    // Estimates the mmWave CSI of one sample under the given observation SNR.
    std::function<ComplexMatrix(const DualBandSample&, double snr_db, uint64_t noise_seed)>
        estimate;
    long long pilot_overhead = 0;
    long long flops_per_sample = 0;
};

// The extrapolator consumes the sub-6 CSI corrupted at the observation SNR.
// pd_sub6 is the pilot density used for the sub-6 estimation stage; it only
// affects the reported overhead (the corruption model is AWGN on the CSI).
inline Method make_mdfce_method(const MdfceModel& model, Rational pd_sub6 = {1, 1},
                                std::string name = "") {
    Method m;
    m.name = name.empty() ? (model.no_tfem ? "mdfce_no_tfem" : "mdfce") : std::move(name);
    m.pilot_overhead = pilot_overhead(pd_sub6, model.cfg.sub6_ue, model.cfg.sub6_k);
    m.flops_per_sample = flops_per_sample(model.cfg).total();
    m.estimate = [&model](const DualBandSample& s, double snr_db, uint64_t noise_seed) {
        return mdfce_forward(apply_awgn(s.h_sub6, snr_db, noise_seed), model);
    };
    return m;
}

// Direct mmWave estimation: LS at the pilot subcarriers from noisy pilot
// observations, then linear interpolation across the full grid.
inline Method make_ls_method(const SystemConfig& sys, const PilotConfig& pilots) {
    Method m;
    m.name = "ls_linear_pd" + pilots.density.str();
    const int K = sys.mmwave.subcarriers;
    const int ue = sys.mmwave.ue_antennas;
    const auto idx = pilot_indices(pilots.density, K);
    m.pilot_overhead = pilot_overhead(pilots.density, ue, K);
    m.flops_per_sample =
        ls_baseline_flops(sys.mmwave.bs_antennas, ue, K, static_cast<int>(idx.size()));
    m.estimate = [sys, pilots, idx, K, ue](const DualBandSample& s, double snr_db,
                                           uint64_t noise_seed) {
        ComplexMatrix y = pilot_observation(s.h_mmwave, idx, ue, K, pilots);
        y = apply_awgn(y, snr_db, noise_seed);
        const ComplexMatrix h_pilots = ls_estimate(y, idx, ue, pilots);
        return interpolate_pilots(h_pilots, idx, K, ue);
    };
    return m;
}

// One row per (method, SNR): corrupt, estimate, average per-sample NMSE.
inline EvalReport evaluate(const std::vector<Method>& methods,
                           const std::vector<DualBandSample>& samples,
                           const std::vector<double>& snr_list, uint64_t seed = 1) {
    if (samples.empty()) throw ContractError("evaluate: empty dataset");
    if (methods.empty()) throw ContractError("evaluate: no methods");
    if (snr_list.empty()) throw ContractError("evaluate: empty SNR list");
    EvalReport report;
    for (const Method& m : methods) {
        for (size_t si = 0; si < snr_list.size(); ++si) {
            const double snr = snr_list[si];
            double acc = 0.0;
            for (size_t i = 0; i < samples.size(); ++i) {
                const ComplexMatrix est =
                    m.estimate(samples[i], snr, derive_seed(seed, si, i));
                acc += nmse_loss({samples[i].h_mmwave}, {est});
            }
            EvalRow row;
            row.snr_db = snr;
            row.method = m.name;
            row.nmse_linear = acc / static_cast<double>(samples.size());
            row.nmse_db = nmse_db_floored(row.nmse_linear);
            row.pilot_overhead = m.pilot_overhead;
            row.flops_per_sample = m.flops_per_sample;
            report.push_back(row);
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string eval_report_csv(const EvalReport& report) {
    std::string out = "snr_db,method,nmse_linear,nmse_db,pilot_overhead,flops_per_sample\n";
    for (const EvalRow& r : report) {
        out += format_double(r.snr_db);
        out += ',' + r.method + ',' + format_double(r.nmse_linear) + ',' +
               format_double(r.nmse_db) + ',' + std::to_string(r.pilot_overhead) + ',' +
               std::to_string(r.flops_per_sample) + '\n';
    }
    return out;
}

inline std::string eval_report_table(const EvalReport& report) {
    char line[256];
    std::string out;
    std::snprintf(line, sizeof line, "%-8s %-24s %-14s %-12s %-10s %s\n", "snr_db", "method",
                  "nmse_linear", "nmse_db", "pilots", "flops");
    out += line;
    for (const EvalRow& r : report) {
        const bool floored = r.nmse_db <= kNmseDbFloor;
        std::snprintf(line, sizeof line, "%-8s %-24s %-14s %-12s %-10lld %lld\n",
                      format_double(r.snr_db).c_str(), r.method.c_str(),
                      format_double(r.nmse_linear).c_str(),
                      floored ? "< -150" : format_double(r.nmse_db).c_str(), r.pilot_overhead,
                      r.flops_per_sample);
        out += line;
    }
    return out;
}

inline std::string history_csv(const std::vector<EpochStats>& history) {
    std::string out = "epoch,total_loss,nmse_loss,aux_loss,lr\n";
    for (const EpochStats& e : history) {
        out += std::to_string(e.epoch) + ',' + format_double(e.total_loss) + ',' +
               format_double(e.nmse_loss) + ',' + format_double(e.aux_loss) + ',' +
               format_double(e.lr) + '\n';
    }
    return out;
}

} // namespace mdfce

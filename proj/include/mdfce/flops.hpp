// SPDX-License-Identifier: Apache-2.0
//
// mdfce: dual-band massive MIMO channel extrapolation toolkit
//
// Analytic multiply-accumulate counts for one inference sample. Only matrix
// products are counted (a linear map of an m x k input into k x n costs
// m*k*n MACs); activations, norms and bias adds are excluded. Experts are
// charged at top_k evaluations per token, which is the sparse-compute
// contract of the MoE layer.

#pragma once

#include <cstdint>

#include "mdfce/model.hpp"

namespace mdfce {

struct FlopsBreakdown {
    long long tfem = 0;
    long long input_projection = 0;
    long long mhsa_qkv = 0;
    long long mhsa_scores = 0;
    long long mhsa_apply = 0;
    long long mhsa_out = 0;
    long long moe_gate = 0;
    long long moe_experts = 0;
    long long output_map = 0;

    long long mhsa_total() const { return mhsa_qkv + mhsa_scores + mhsa_apply + mhsa_out; }
    long long total() const {
        return tfem + input_projection + mhsa_total() + moe_gate + moe_experts + output_map;
    }
};

inline FlopsBreakdown flops_per_sample(const ModelConfig& cfg) {
    cfg.validate();
    FlopsBreakdown f;
    const long long T = cfg.tokens_in();
    const long long d = cfg.d_re;
    const long long fin = cfg.feat_in();
    const long long layers = 1 + cfg.n_blocks; // MDFM + DFIM blocks

    // TFEM: token FFN on the transposed input, then the feature FFN.
    f.tfem = fin * T * (2 * T) + fin * (2 * T) * T      // across tokens
           + T * fin * (2 * d) + T * (2 * d) * d;       // across features

    f.input_projection = T * fin * d;

    f.mhsa_qkv = layers * 3 * T * d * d;
    f.mhsa_scores = layers * T * T * d; // N_h heads of T*T*d_head each
    f.mhsa_apply = layers * T * T * d;
    f.mhsa_out = layers * T * d * d;

    f.moe_gate = layers * T * d * cfg.n_experts;
    f.moe_experts = layers * static_cast<long long>(cfg.top_k) * T * 2 * d * cfg.d_expert();

    f.output_map = static_cast<long long>(cfg.tokens_out()) * T * d +
                   static_cast<long long>(cfg.tokens_out()) * d * cfg.feat_out();
    return f;
}

// Independent dense route: every expert evaluates every token. Used to pin
// the sparse counter — flops_per_sample with top_k = n_experts must equal
// this exactly, and the expert term must scale as top_k / n_experts.
inline long long dense_moe_expert_flops(const ModelConfig& cfg) {
    long long per_layer = 0;
    for (int j = 0; j < cfg.n_experts; ++j)
        per_layer += static_cast<long long>(cfg.tokens_in()) * 2 * cfg.d_re * cfg.d_expert();
    return (1 + cfg.n_blocks) * per_layer;
}

// LS + linear interpolation cost for comparison rows: one diagonal solve per
// pilot subcarrier plus two interpolation MACs per interpolated entry.
inline long long ls_baseline_flops(int bs_antennas, int ue_antennas, int subcarriers,
                                   int pilot_count) {
    const long long ls = static_cast<long long>(bs_antennas) * ue_antennas * pilot_count;
    const long long interp =
        static_cast<long long>(bs_antennas) * ue_antennas * (subcarriers - pilot_count) * 2;
    return ls + interp;
}

} // namespace mdfce

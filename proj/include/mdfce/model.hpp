// SPDX-License-Identifier: Apache-2.0
//
// mdfce: dual-band massive MIMO channel extrapolation toolkit
//
// The extrapolator network. Data flow per sample:
//
//   h_sub6 --(csi_to_real + normalize)--> x_f_norm --W_re,+P--> MDFM --+
//   h_sub6 --(freq_to_time + csi_to_real)--> TFEM latent --(gate)--^   |
//                                                    DFIM blocks <-----+
//                                                        |
//                               output maps + denormalize --> h_mmwave

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "mdfce/channel.hpp"
#include "mdfce/complex_matrix.hpp"
#include "mdfce/ops.hpp"
#include "mdfce/rng.hpp"

namespace mdfce {

struct ModelConfig {
    int d_re = 128;    // latent width
    int d_hid = 256;   // total expert hidden budget; each expert gets d_hid / n_experts
    int n_experts = 8;
    int top_k = 2;
    int n_heads = 4;
    int n_blocks = 7;  // DFIM depth N_s

    // Geometry, mirrored from SystemConfig.
    int sub6_bs = 16, sub6_ue = 2, sub6_k = 128;
    int mm_bs = 32, mm_ue = 2, mm_k = 256;

    int tokens_in() const { return sub6_bs * sub6_ue; }
    int feat_in() const { return 2 * sub6_k; }
    int tokens_out() const { return mm_bs * mm_ue; }
    int feat_out() const { return 2 * mm_k; }
    int d_expert() const { return d_hid / n_experts; }
    int d_head() const { return d_re / n_heads; }

    void validate() const {
        if (d_re % n_heads != 0)
            throw ContractError("ModelConfig: d_re=" + std::to_string(d_re) +
                                " not divisible by n_heads=" + std::to_string(n_heads));
        if (d_hid % n_experts != 0)
            throw ContractError("ModelConfig: d_hid=" + std::to_string(d_hid) +
                                " not divisible by n_experts=" + std::to_string(n_experts));
        if (top_k < 1 || top_k > n_experts)
            throw ContractError("ModelConfig: top_k must lie in [1, n_experts]");
        if (n_blocks < 0) throw ContractError("ModelConfig: n_blocks must be >= 0");
        if (sub6_bs < 1 || sub6_ue < 1 || sub6_k < 1 || mm_bs < 1 || mm_ue < 1 || mm_k < 1)
            throw ContractError("ModelConfig: all geometry counts must be >= 1");
    }

    void adopt_geometry(const SystemConfig& sys) {
        sub6_bs = sys.sub6.bs_antennas;
        sub6_ue = sys.sub6.ue_antennas;
        sub6_k = sys.sub6.subcarriers;
        mm_bs = sys.mmwave.bs_antennas;
        mm_ue = sys.mmwave.ue_antennas;
        mm_k = sys.mmwave.subcarriers;
    }
};

// Per-feature input/target statistics, computed once over the training split
// and frozen, so inference is batch-size independent.
struct NormStats {
    std::vector<double> input_mean, input_std;   // length feat_in
    std::vector<double> target_mean, target_std; // length feat_out

    static NormStats identity(const ModelConfig& cfg) {
        NormStats n;
        n.input_mean.assign(cfg.feat_in(), 0.0);
        n.input_std.assign(cfg.feat_in(), 1.0);
        n.target_mean.assign(cfg.feat_out(), 0.0);
        n.target_std.assign(cfg.feat_out(), 1.0);
        return n;
    }
};

// ---------------------------------------------------------------------------
// CSI <-> real-token conversion

// Token axis enumerates (BS antenna, UE antenna) pairs, BS-major; feature
// axis is [Re over K subcarriers || Im over K subcarriers].
inline Tensor csi_to_real(const ComplexMatrix& h, int ue_antennas, int subcarriers) {
    if (h.cols != ue_antennas * subcarriers)
        throw ShapeError("csi_to_real: " + std::to_string(h.cols) + " columns, expected " +
                         std::to_string(ue_antennas) + "*" + std::to_string(subcarriers));
    const int tokens = h.rows * ue_antennas;
    Tensor x = Tensor::zeros({tokens, 2 * subcarriers});
    for (int b = 0; b < h.rows; ++b)
        for (int u = 0; u < ue_antennas; ++u) {
            const int t = b * ue_antennas + u;
            for (int k = 0; k < subcarriers; ++k) {
                const cplx z = h.at(b, u * subcarriers + k);
                x.at(t, k) = z.real();
                x.at(t, subcarriers + k) = z.imag();
            }
        }
    return x;
}

inline ComplexMatrix real_to_csi(const Tensor& x, int bs_antennas, int ue_antennas,
                                 int subcarriers) {
    if (x.rows() != bs_antennas * ue_antennas || x.cols() != 2 * subcarriers)
        throw ShapeError("real_to_csi: tensor " + shape_str(x.shape()) + " does not match " +
                         std::to_string(bs_antennas) + "x" + std::to_string(ue_antennas) + "x" +
                         std::to_string(subcarriers));
    ComplexMatrix h(bs_antennas, ue_antennas * subcarriers);
    for (int b = 0; b < bs_antennas; ++b)
        for (int u = 0; u < ue_antennas; ++u) {
            const int t = b * ue_antennas + u;
            for (int k = 0; k < subcarriers; ++k)
                h.at(b, u * subcarriers + k) = cplx(x.at(t, k), x.at(t, subcarriers + k));
        }
    return h;
}

// ---------------------------------------------------------------------------
// Parameter groups

struct FfnParams {
    Tensor w1, b1, w2, b2;

    void init(int d_in, int d_hidden, int d_out, Rng& rng) {
        w1 = Tensor::rand_uniform({d_in, d_hidden}, rng, 1.0 / std::sqrt(double(d_in)), true);
        b1 = Tensor::zeros({d_hidden}, true);
        w2 = Tensor::rand_uniform({d_hidden, d_out}, rng, 1.0 / std::sqrt(double(d_hidden)), true);
        b2 = Tensor::zeros({d_out}, true);
    }
};

// FFN(X) = relu(X W1 + b1) W2 + b2
inline Tensor ffn_forward(Graph& g, const Tensor& x, const FfnParams& p) {
    Tensor h = relu(g, add_rowvec(g, matmul(g, x, p.w1), p.b1));
    return add_rowvec(g, matmul(g, h, p.w2), p.b2);
}

struct AttentionParams {
    Tensor wq, wk, wv, wo;

    void init(int d, Rng& rng) {
        const double bound = 1.0 / std::sqrt(double(d));
        wq = Tensor::rand_uniform({d, d}, rng, bound, true);
        wk = Tensor::rand_uniform({d, d}, rng, bound, true);
        wv = Tensor::rand_uniform({d, d}, rng, bound, true);
        wo = Tensor::rand_uniform({d, d}, rng, bound, true);
    }
};

struct LayerNormParams {
    Tensor gain, bias;

    void init(int d) {
        gain = Tensor::full({d}, 1.0, true);
        bias = Tensor::zeros({d}, true);
    }
};

struct MoeParams {
    Tensor gate_w, gate_b;
    std::vector<FfnParams> experts;

    void init(const ModelConfig& cfg, Rng& rng) {
        gate_w = Tensor::rand_uniform({cfg.d_re, cfg.n_experts}, rng,
                                      1.0 / std::sqrt(double(cfg.d_re)), true);
        gate_b = Tensor::zeros({cfg.n_experts}, true);
        experts.resize(cfg.n_experts);
        for (FfnParams& e : experts) e.init(cfg.d_re, cfg.d_expert(), cfg.d_re, rng);
    }
};

struct TfemParams {
    FfnParams token_ffn; // acts across tokens, on the transposed input
    FfnParams feat_ffn;  // maps 2K^s -> d_re

    void init(const ModelConfig& cfg, Rng& rng) {
        token_ffn.init(cfg.tokens_in(), 2 * cfg.tokens_in(), cfg.tokens_in(), rng);
        feat_ffn.init(cfg.feat_in(), 2 * cfg.d_re, cfg.d_re, rng);
    }
};

struct MdfmParams {
    AttentionParams attn;
    LayerNormParams ln1, ln2;
    MoeParams moe;
};

struct DfimBlockParams {
    LayerNormParams ln1, ln2;
    AttentionParams attn;
    MoeParams moe;
};

struct OutputParams {
    Tensor token_map;   // tokens_in x tokens_out
    Tensor feature_map; // d_re x feat_out

    void init(const ModelConfig& cfg, Rng& rng) {
        token_map = Tensor::rand_uniform({cfg.tokens_in(), cfg.tokens_out()}, rng,
                                         1.0 / std::sqrt(double(cfg.tokens_in())), true);
        // Zero start: the untrained model predicts the target mean instead of
        // head-induced noise, which otherwise costs the first training epochs.
        feature_map = Tensor::zeros({cfg.d_re, cfg.feat_out()}, true);
    }
};

// ---------------------------------------------------------------------------
// Gating

// Per-token routing record for one MoE layer.
struct GateDecision {
    Tensor logits;         // T x N_e (graph tensor)
    Tensor mask;           // T x N_e, entries 0/1, constant
    Tensor weights;        // T x N_e, exactly K nonzeros per row (graph tensor)
    Tensor mean_gate;      // 1 x N_e, m_j = column mean of weights (graph tensor)
    Tensor route_fraction; // 1 x N_e, p_j = column mean of mask, constant
    // Smallest (K-th minus (K+1)-th) logit gap over rows; +inf when K = N_e.
    // Finite-difference checks require this to exceed the probe step.
    double min_margin = 0.0;
};

// Collects per-forward diagnostics: every gate decision plus the number of
// expert-FFN token evaluations (the sparse-compute contract says K*T per
// MoE layer, not N_e*T).
struct ForwardTrace {
    std::vector<GateDecision> gates;
    long long expert_token_evals = 0;
};

// Top-K routing with ties broken toward the lowest expert index, then a
// softmax over the kept logits only (non-selected entries are exactly 0).
inline std::pair<Tensor, GateDecision> moe_forward(Graph& g, const Tensor& x,
                                                   const Tensor& gate_input, const MoeParams& p,
                                                   const ModelConfig& cfg,
                                                   ForwardTrace* trace = nullptr) {
    if (gate_input.rows() != x.rows())
        throw ShapeError("moe_forward: gate input rows " + std::to_string(gate_input.rows()) +
                         " != token rows " + std::to_string(x.rows()));
    const int T = x.rows();
    const int ne = cfg.n_experts;
    const int k = cfg.top_k;

    GateDecision gd;
    gd.logits = add_rowvec(g, matmul(g, gate_input, p.gate_w), p.gate_b);
    gd.mask = Tensor::zeros({T, ne});
    gd.min_margin = std::numeric_limits<double>::infinity();

    std::vector<int> order(ne);
    for (int t = 0; t < T; ++t) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return gd.logits.at(t, a) > gd.logits.at(t, b);
        });
        for (int j = 0; j < k; ++j) gd.mask.at(t, order[j]) = 1.0;
        if (k < ne)
            gd.min_margin = std::min(gd.min_margin,
                                     gd.logits.at(t, order[k - 1]) - gd.logits.at(t, order[k]));
    }
    gd.weights = softmax_rows(g, gd.logits, gd.mask);

    gd.route_fraction = Tensor::zeros({1, ne});
    for (int j = 0; j < ne; ++j) {
        double c = 0.0;
        for (int t = 0; t < T; ++t) c += gd.mask.at(t, j);
        gd.route_fraction[j] = c / T;
    }
    gd.mean_gate = col_mean(g, gd.weights);

    // Experts run only on the tokens routed to them.
    Tensor out = Tensor::zeros({T, cfg.d_re});
    std::vector<int> idx;
    for (int j = 0; j < ne; ++j) {
        idx.clear();
        for (int t = 0; t < T; ++t)
            if (gd.mask.at(t, j) != 0.0) idx.push_back(t);
        if (idx.empty()) continue;
        if (trace) trace->expert_token_evals += static_cast<long long>(idx.size());
        Tensor xin = gather_rows(g, x, idx);
        Tensor e = ffn_forward(g, xin, p.experts[j]);
        Tensor wj = gather_rows(g, slice_cols(g, gd.weights, j, j + 1), idx);
        Tensor weighted = scale_rows(g, e, wj);
        out = add(g, out, scatter_rows(g, weighted, idx, T));
    }
    if (trace) trace->gates.push_back(gd);
    return {out, gd};
}

// ---------------------------------------------------------------------------
// Attention

inline Tensor mhsa_forward(Graph& g, const Tensor& x, const AttentionParams& p, int n_heads) {
    const int d = x.cols();
    const int dk = d / n_heads;
    Tensor q = matmul(g, x, p.wq);
    Tensor kk = matmul(g, x, p.wk);
    Tensor v = matmul(g, x, p.wv);
    std::vector<Tensor> heads;
    heads.reserve(n_heads);
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
    for (int h = 0; h < n_heads; ++h) {
        Tensor qh = slice_cols(g, q, h * dk, (h + 1) * dk);
        Tensor kh = slice_cols(g, kk, h * dk, (h + 1) * dk);
        Tensor vh = slice_cols(g, v, h * dk, (h + 1) * dk);
        Tensor scores = scale(g, matmul_nt(g, qh, kh), inv_sqrt_dk);
        Tensor attn = softmax_rows(g, scores);
        heads.push_back(matmul(g, attn, vh));
    }
    return matmul(g, concat_cols(g, heads), p.wo);
}

// ---------------------------------------------------------------------------
// Modules

// Spatiotemporal encoder: FFN across tokens (on the transpose), then FFN
// across features, applied to the real delay-domain CSI.
inline Tensor tfem_forward(Graph& g, const Tensor& x_t, const TfemParams& p,
                           const ModelConfig& cfg) {
    if (x_t.rows() != cfg.tokens_in() || x_t.cols() != cfg.feat_in())
        throw ShapeError("tfem_forward: input " + shape_str(x_t.shape()) + ", expected [" +
                         std::to_string(cfg.tokens_in()) + "x" + std::to_string(cfg.feat_in()) + "]");
    Tensor across_tokens = transpose(g, ffn_forward(g, transpose(g, x_t), p.token_ffn));
    return ffn_forward(g, across_tokens, p.feat_ffn);
}

// X_PE = X_f' W_re + P
inline Tensor project_embed(Graph& g, const Tensor& x_f_norm, const Tensor& w_re,
                            const Tensor& pos_embed) {
    return add(g, matmul(g, x_f_norm, w_re), pos_embed);
}

// Fusion block: MHSA over the projected spatial-frequency tokens, then the
// MoE layer routed by the TFEM latent; residual + layer norm around both.
inline Tensor mdfm_forward(Graph& g, const Tensor& x_pe, const Tensor& gate_latent,
                           const MdfmParams& p, const ModelConfig& cfg, ForwardTrace* trace) {
    Tensor u = layer_norm(g, add(g, x_pe, mhsa_forward(g, x_pe, p.attn, cfg.n_heads)), p.ln1.gain,
                          p.ln1.bias);
    const Tensor& gate_in = gate_latent.defined() ? gate_latent : u;
    auto [moe_out, gd] = moe_forward(g, u, gate_in, p.moe, cfg, trace);
    return layer_norm(g, add(g, u, moe_out), p.ln2.gain, p.ln2.bias);
}

// Deep interaction block (pre-norm): the MoE gate and experts share one
// input, the normalized post-attention representation.
inline Tensor dfim_block_forward(Graph& g, const Tensor& x, const DfimBlockParams& p,
                                 const ModelConfig& cfg, ForwardTrace* trace) {
    Tensor u = add(g, x, mhsa_forward(g, layer_norm(g, x, p.ln1.gain, p.ln1.bias), p.attn,
                                      cfg.n_heads));
    Tensor nu = layer_norm(g, u, p.ln2.gain, p.ln2.bias);
    auto [moe_out, gd] = moe_forward(g, nu, nu, p.moe, cfg, trace);
    return add(g, u, moe_out);
}

// ---------------------------------------------------------------------------
// Full model

struct MdfceModel {
    ModelConfig cfg;
    SystemConfig sys;
    NormStats norm;

    TfemParams tfem;
    Tensor w_re;
    Tensor pos_embed;
    MdfmParams mdfm;
    std::vector<DfimBlockParams> dfim;
    OutputParams out;

    // Ablation: route the MDFM MoE by its own input instead of the TFEM latent.
    bool no_tfem = false;

    struct NamedParam {
        std::string name;
        Tensor tensor;
    };

    static MdfceModel init(const ModelConfig& cfg, const SystemConfig& sys, uint64_t seed) {
        cfg.validate();
        MdfceModel m;
        m.cfg = cfg;
        m.sys = sys;
        m.norm = NormStats::identity(cfg);
        Rng rng(derive_seed(seed, 0x6d6f64656c /* "model" */));
        m.tfem.init(cfg, rng);
        m.w_re = Tensor::rand_uniform({cfg.feat_in(), cfg.d_re}, rng,
                                      1.0 / std::sqrt(double(cfg.feat_in())), true);
        // P is drawn from the standard normal.
        m.pos_embed = Tensor::randn({cfg.tokens_in(), cfg.d_re}, rng, 1.0, true);
        m.mdfm.attn.init(cfg.d_re, rng);
        m.mdfm.ln1.init(cfg.d_re);
        m.mdfm.ln2.init(cfg.d_re);
        m.mdfm.moe.init(cfg, rng);
        m.dfim.resize(cfg.n_blocks);
        for (DfimBlockParams& b : m.dfim) {
            b.ln1.init(cfg.d_re);
            b.ln2.init(cfg.d_re);
            b.attn.init(cfg.d_re, rng);
            b.moe.init(cfg, rng);
        }
        m.out.init(cfg, rng);
        return m;
    }

    std::vector<NamedParam> parameters() {
        std::vector<NamedParam> ps;
        auto ffn = [&](const std::string& base, FfnParams& f) {
            ps.push_back({base + ".w1", f.w1});
            ps.push_back({base + ".b1", f.b1});
            ps.push_back({base + ".w2", f.w2});
            ps.push_back({base + ".b2", f.b2});
        };
        auto attn = [&](const std::string& base, AttentionParams& a) {
            ps.push_back({base + ".wq", a.wq});
            ps.push_back({base + ".wk", a.wk});
            ps.push_back({base + ".wv", a.wv});
            ps.push_back({base + ".wo", a.wo});
        };
        auto ln = [&](const std::string& base, LayerNormParams& l) {
            ps.push_back({base + ".gain", l.gain});
            ps.push_back({base + ".bias", l.bias});
        };
        auto moe = [&](const std::string& base, MoeParams& m) {
            ps.push_back({base + ".gate_w", m.gate_w});
            ps.push_back({base + ".gate_b", m.gate_b});
            for (size_t j = 0; j < m.experts.size(); ++j)
                ffn(base + ".expert" + std::to_string(j), m.experts[j]);
        };
        ffn("tfem.token_ffn", tfem.token_ffn);
        ffn("tfem.feat_ffn", tfem.feat_ffn);
        ps.push_back({"w_re", w_re});
        ps.push_back({"pos_embed", pos_embed});
        attn("mdfm.attn", mdfm.attn);
        ln("mdfm.ln1", mdfm.ln1);
        ln("mdfm.ln2", mdfm.ln2);
        moe("mdfm.moe", mdfm.moe);
        for (size_t i = 0; i < dfim.size(); ++i) {
            const std::string base = "dfim" + std::to_string(i);
            ln(base + ".ln1", dfim[i].ln1);
            ln(base + ".ln2", dfim[i].ln2);
            attn(base + ".attn", dfim[i].attn);
            moe(base + ".moe", dfim[i].moe);
        }
        ps.push_back({"out.token_map", out.token_map});
        ps.push_back({"out.feature_map", out.feature_map});
        return ps;
    }

    void zero_grads() {
        for (auto& p : parameters()) p.tensor.drop_grad();
    }

    // Deep copy with fresh parameter storage (for per-thread replicas).
    MdfceModel clone() const {
        MdfceModel copy = init(cfg, sys, 0);
        copy.norm = norm;
        copy.no_tfem = no_tfem;
        auto src = const_cast<MdfceModel*>(this)->parameters();
        auto dst = copy.parameters();
        for (size_t i = 0; i < src.size(); ++i) dst[i].tensor.values() = src[i].tensor.values();
        return copy;
    }

    void copy_values_from(const MdfceModel& other) {
        auto src = const_cast<MdfceModel&>(other).parameters();
        auto dst = parameters();
        for (size_t i = 0; i < src.size(); ++i) dst[i].tensor.values() = src[i].tensor.values();
    }
};

// Normalizes the real input with frozen stats (pure preprocessing; inputs
// carry no gradient).
inline Tensor normalize_input(const Tensor& x_f, const NormStats& norm) {
    Tensor out = Tensor::zeros(x_f.shape());
    const int m = x_f.rows(), n = x_f.cols();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out.at(i, j) = (x_f.at(i, j) - norm.input_mean[j]) / norm.input_std[j];
    return out;
}

// Latent -> mmWave real CSI: token_map^T . latent . feature_map, then
// denormalization with the frozen target stats.
inline Tensor output_project(Graph& g, const Tensor& latent, const MdfceModel& m) {
    Tensor mapped = matmul(g, matmul_tn(g, m.out.token_map, latent), m.out.feature_map);
    Tensor std_row = Tensor::from({1, m.cfg.feat_out()}, m.norm.target_std);
    Tensor mean_row = Tensor::from({1, m.cfg.feat_out()}, m.norm.target_mean);
    return add_rowvec(g, mul_rowvec(g, mapped, std_row), mean_row);
}

// Preprocessed per-sample inputs; computing these once per sample keeps the
// training loop off the FFT path.
struct ModelInput {
    Tensor x_f_norm; // tokens_in x feat_in, normalized spatial-frequency CSI
    Tensor x_t;      // tokens_in x feat_in, raw spatial-delay CSI
};

inline ModelInput prepare_input(const ComplexMatrix& h_sub6, const MdfceModel& m) {
    if (h_sub6.rows != m.cfg.sub6_bs || h_sub6.cols != m.cfg.sub6_ue * m.cfg.sub6_k)
        throw ContractError("mdfce_forward: input CSI is " + std::to_string(h_sub6.rows) + "x" +
                            std::to_string(h_sub6.cols) + ", model expects " +
                            std::to_string(m.cfg.sub6_bs) + "x" +
                            std::to_string(m.cfg.sub6_ue * m.cfg.sub6_k));
    ModelInput in;
    in.x_f_norm = normalize_input(csi_to_real(h_sub6, m.cfg.sub6_ue, m.cfg.sub6_k), m.norm);
    in.x_t = csi_to_real(freq_to_time(h_sub6, m.cfg.sub6_k), m.cfg.sub6_ue, m.cfg.sub6_k);
    return in;
}

// Full forward pass on preprocessed inputs; returns the denormalized real
// mmWave prediction (tokens_out x feat_out).
inline Tensor mdfce_forward_real(Graph& g, const ModelInput& in, const MdfceModel& m,
                                 ForwardTrace* trace = nullptr) {
    Tensor gate_latent;
    if (!m.no_tfem) gate_latent = tfem_forward(g, in.x_t, m.tfem, m.cfg);
    Tensor x_pe = project_embed(g, in.x_f_norm, m.w_re, m.pos_embed);
    Tensor y = mdfm_forward(g, x_pe, gate_latent, m.mdfm, m.cfg, trace);
    for (const DfimBlockParams& b : m.dfim) y = dfim_block_forward(g, y, b, m.cfg, trace);
    return output_project(g, y, m);
}

// Inference entry point: sub-6 CSI in, estimated mmWave CSI out.
inline ComplexMatrix mdfce_forward(const ComplexMatrix& h_sub6, const MdfceModel& m,
                                   ForwardTrace* trace = nullptr) {
    Graph g;
    g.recording = false;
    const Tensor pred = mdfce_forward_real(g, prepare_input(h_sub6, m), m, trace);
    return real_to_csi(pred, m.cfg.mm_bs, m.cfg.mm_ue, m.cfg.mm_k);
}

} // namespace mdfce

// SPDX-License-Identifier: Apache-2.0
//
// mdfce: dual-band massive MIMO channel extrapolation toolkit

#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "mdfce/complex_matrix.hpp"
#include "mdfce/model.hpp"
#include "mdfce/ops.hpp"

namespace mdfce {

// Floor applied when serializing NMSE in dB, so exact estimates do not put
// -inf into CSV files.
constexpr double kNmseDbFloor = -150.0;

// (1/N) sum_i ||H_i - Hhat_i||_F^2 / ||H_i||_F^2
inline double nmse_loss(const std::vector<ComplexMatrix>& h_true,
                        const std::vector<ComplexMatrix>& h_est) {
    if (h_true.empty() || h_true.size() != h_est.size())
        throw ContractError("nmse_loss: batch sizes disagree or empty");
    double acc = 0.0;
    for (size_t i = 0; i < h_true.size(); ++i) {
        const ComplexMatrix& a = h_true[i];
        const ComplexMatrix& b = h_est[i];
        if (a.rows != b.rows || a.cols != b.cols)
            throw ShapeError("nmse_loss: sample " + std::to_string(i) + " shapes disagree, " +
                             std::to_string(a.rows) + "x" + std::to_string(a.cols) + " vs " +
                             std::to_string(b.rows) + "x" + std::to_string(b.cols));
        const double denom = a.squared_norm();
        if (!(denom > 0.0))
            throw ContractError("nmse_loss: sample " + std::to_string(i) +
                                " has zero-norm ground truth");
        double num = 0.0;
        for (size_t j = 0; j < a.v.size(); ++j) num += std::norm(a.v[j] - b.v[j]);
        acc += num / denom;
    }
    return acc / static_cast<double>(h_true.size());
}

// In-graph single-sample NMSE on real-form tensors. The complex Frobenius
// norm equals the sum of squares of the real representation, so this matches
// nmse_loss on the corresponding ComplexMatrix pair.
inline Tensor nmse_loss_graph(Graph& g, const Tensor& pred_real, const Tensor& target_real) {
    double denom = 0.0;
    for (size_t i = 0; i < target_real.numel(); ++i) denom += target_real[i] * target_real[i];
    if (!(denom > 0.0)) throw ContractError("nmse_loss_graph: zero-norm ground truth");
    Tensor diff = sub(g, pred_real, target_real);
    return scale(g, sum_all(g, mul(g, diff, diff)), 1.0 / denom);
}

// L_aux = N_e * sum_j m_j p_j, averaged over the MoE layers of one forward.
// p is piecewise-constant in the parameters; gradient flows through m only.
inline Tensor aux_loss_graph(Graph& g, const std::vector<GateDecision>& gates) {
    if (gates.empty()) throw ContractError("aux_loss: no gate decisions");
    Tensor acc;
    for (const GateDecision& gd : gates) {
        const int ne = gd.mean_gate.cols();
        Tensor term = scale(g, sum_all(g, mul(g, gd.mean_gate, gd.route_fraction)),
                            static_cast<double>(ne));
        acc = acc.defined() ? add(g, acc, term) : term;
    }
    return scale(g, acc, 1.0 / static_cast<double>(gates.size()));
}

inline double aux_loss(const std::vector<GateDecision>& gates) {
    Graph g;
    g.recording = false;
    return aux_loss_graph(g, gates).value();
}

// L_total = kappa * L_NMSE + (1 - kappa) * L_aux
inline Tensor total_loss_graph(Graph& g, const Tensor& nmse, const Tensor& aux, double kappa) {
    if (!(kappa >= 0.0 && kappa <= 1.0)) throw ContractError("total_loss: kappa must lie in [0,1]");
    return add(g, scale(g, nmse, kappa), scale(g, aux, 1.0 - kappa));
}

inline double total_loss(double nmse, double aux, double kappa) {
    if (!(kappa >= 0.0 && kappa <= 1.0)) throw ContractError("total_loss: kappa must lie in [0,1]");
    return kappa * nmse + (1.0 - kappa) * aux;
}

// 10 log10(x); 0 maps to the -inf sentinel.
inline double nmse_db(double nmse_linear) {
    if (nmse_linear < 0.0) throw ContractError("nmse_db: negative NMSE");
    if (nmse_linear == 0.0) return -std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(nmse_linear);
}

inline double nmse_db_floored(double nmse_linear) {
    return std::max(kNmseDbFloor, nmse_db(nmse_linear));
}

} // namespace mdfce

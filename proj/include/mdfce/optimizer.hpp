// SPDX-License-Identifier: Apache-2.0
//
// mdfce: dual-band massive MIMO channel extrapolation toolkit

#pragma once

#include <cmath>
#include <vector>

#include "mdfce/tensor.hpp"

namespace mdfce {

// AdamW with decoupled weight decay: the decay term is applied directly to
// the parameters and never enters the moment estimates.
class AdamW {
public:
    struct Hyper {
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 0.01;
    };

    AdamW() = default;
    explicit AdamW(Hyper hyper) : hyper_(hyper) {}

    const Hyper& hyper() const { return hyper_; }
    long step_count() const { return step_; }

    // Parameters are identified by position; the caller must pass the same
    // ordered group list every step.
    void step(std::vector<Tensor>& params, double lr) {
        if (m_.size() != params.size()) {
            m_.resize(params.size());
            v_.resize(params.size());
            for (size_t i = 0; i < params.size(); ++i) {
                m_[i].assign(params[i].numel(), 0.0);
                v_[i].assign(params[i].numel(), 0.0);
            }
        }
        ++step_;
        const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(step_));
        for (size_t i = 0; i < params.size(); ++i) {
            Tensor& p = params[i];
            const bool has_grad = p.has_grad();
            const std::vector<double>* grad = has_grad ? &p.grad() : nullptr;
            auto& m = m_[i];
            auto& v = v_[i];
            for (size_t j = 0; j < p.numel(); ++j) {
                const double gj = has_grad ? (*grad)[j] : 0.0;
                m[j] = hyper_.beta1 * m[j] + (1.0 - hyper_.beta1) * gj;
                v[j] = hyper_.beta2 * v[j] + (1.0 - hyper_.beta2) * gj * gj;
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                p[j] -= lr * hyper_.weight_decay * p[j];
                p[j] -= lr * mhat / (std::sqrt(vhat) + hyper_.eps);
            }
        }
    }

private:
    Hyper hyper_;
    long step_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

// Linear warmup to target_lr over the first warmup_fraction of total steps,
// constant afterwards.
inline double lr_schedule(double target_lr, double warmup_fraction, long step, long total_steps) {
    const long warmup_steps = static_cast<long>(warmup_fraction * static_cast<double>(total_steps));
    if (warmup_steps <= 0 || step >= warmup_steps) return target_lr;
    return target_lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
}

} // namespace mdfce

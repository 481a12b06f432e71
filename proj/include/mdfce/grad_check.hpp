// SPDX-License-Identifier: Apache-2.0
//
// mdfce: dual-band massive MIMO channel extrapolation toolkit

#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "mdfce/tensor.hpp"

namespace mdfce {

// Compares reverse-mode gradients of a scalar function against central finite
// differences. Returns the max over coordinates of
//   |analytic - numeric| / max(|analytic|, |numeric|, 1e-12).
// The numeric probe re-evaluates f with recording off, so it stays independent
// of the backward implementation it is checking.
inline double grad_check(const std::function<Tensor(Graph&, const Tensor&)>& f, Tensor x,
                         double eps) {
    if (!(eps >= 1e-7 && eps <= 1e-3))
        throw ContractError("grad_check: eps must lie in [1e-7, 1e-3]");

    const bool was_requiring = x.requires_grad();
    x.set_requires_grad(true);
    x.drop_grad();

    Graph g;
    Tensor y = f(g, x);
    if (y.numel() != 1) throw ContractError("grad_check: f must return a scalar");
    g.backward(y);
    std::vector<double> analytic(x.numel(), 0.0);
    if (x.has_grad()) analytic = x.grad();
    x.drop_grad();
    x.set_requires_grad(was_requiring);

    double max_err = 0.0;
    for (size_t i = 0; i < x.numel(); ++i) {
        const double saved = x[i];
        x[i] = saved + eps;
        Graph gp;
        gp.recording = false;
        const double fp = f(gp, x).value();
        x[i] = saved - eps;
        Graph gm;
        gm.recording = false;
        const double fm = f(gm, x).value();
        x[i] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("grad_check: non-finite function value at probe " + std::to_string(i));
        const double numeric = (fp - fm) / (2.0 * eps);
        const double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-12});
        max_err = std::max(max_err, std::fabs(analytic[i] - numeric) / denom);
    }
    return max_err;
}

// Same comparison for one parameter tensor of a larger model: `loss` must
// re-evaluate the full forward pass (without recording) at the current
// parameter values, and `analytic` holds backward()'s result for `param`.
inline double grad_check_param(const std::function<double()>& loss, Tensor& param,
                               const std::vector<double>& analytic, double eps) {
    if (!(eps >= 1e-7 && eps <= 1e-3))
        throw ContractError("grad_check_param: eps must lie in [1e-7, 1e-3]");
    double max_err = 0.0;
    for (size_t i = 0; i < param.numel(); ++i) {
        const double saved = param[i];
        param[i] = saved + eps;
        const double fp = loss();
        param[i] = saved - eps;
        const double fm = loss();
        param[i] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("grad_check_param: non-finite loss at probe " + std::to_string(i));
        const double numeric = (fp - fm) / (2.0 * eps);
        const double a = i < analytic.size() ? analytic[i] : 0.0;
        const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-12});
        max_err = std::max(max_err, std::fabs(a - numeric) / denom);
    }
    return max_err;
}

} // namespace mdfce

// SPDX-License-Identifier: Apache-2.0
//
// mdfce: dual-band massive MIMO channel extrapolation toolkit
//
// Differentiable primitives. Every op computes its forward value, and when
// the given Graph is recording and an input carries requires_grad, registers
// a backward closure that accumulates into the parents' grad buffers.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "mdfce/tensor.hpp"

namespace mdfce {

namespace detail {

// C(m x n) = A(m x k) * B(k x n); adds into C when accumulate is set.
inline void gemm_nn(const double* A, const double* B, double* C, int m, int k, int n,
                    bool accumulate) {
    for (int i = 0; i < m; ++i) {
        double* c = C + static_cast<size_t>(i) * n;
        if (!accumulate) std::memset(c, 0, sizeof(double) * n);
        const double* a = A + static_cast<size_t>(i) * k;
        for (int t = 0; t < k; ++t) {
            const double av = a[t];
            const double* b = B + static_cast<size_t>(t) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

// C(m x n) = A(m x k) * B(n x k)^T
inline void gemm_nt(const double* A, const double* B, double* C, int m, int k, int n,
                    bool accumulate) {
    for (int i = 0; i < m; ++i) {
        const double* a = A + static_cast<size_t>(i) * k;
        double* c = C + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* b = B + static_cast<size_t>(j) * k;
            double acc = 0.0;
            for (int t = 0; t < k; ++t) acc += a[t] * b[t];
            c[j] = accumulate ? c[j] + acc : acc;
        }
    }
}

// C(k x n) = A(m x k)^T * B(m x n)
inline void gemm_tn(const double* A, const double* B, double* C, int m, int k, int n,
                    bool accumulate) {
    if (!accumulate) std::memset(C, 0, sizeof(double) * static_cast<size_t>(k) * n);
    for (int t = 0; t < m; ++t) {
        const double* a = A + static_cast<size_t>(t) * k;
        const double* b = B + static_cast<size_t>(t) * n;
        for (int i = 0; i < k; ++i) {
            const double av = a[i];
            double* c = C + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

inline void require_2d(const Tensor& t, const char* op) {
    if (t.shape().size() != 2)
        throw ShapeError(std::string(op) + ": expected a 2-D tensor, got " + shape_str(t.shape()));
}

inline bool wire(Graph& g, Tensor& out, std::initializer_list<Tensor> inputs,
                 std::function<void(TensorImpl&)> backward_fn) {
    bool any = false;
    for (const Tensor& in : inputs) any = any || in.requires_grad();
    if (!g.recording || !any) return false;
    out.set_requires_grad(true);
    auto& impl = *out.impl();
    for (const Tensor& in : inputs) impl.parents.push_back(in.impl());
    impl.backward_fn = std::move(backward_fn);
    g.record(out.impl());
    return true;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Matrix products

inline Tensor matmul(Graph& g, const Tensor& a, const Tensor& b) {
    detail::require_2d(a, "matmul");
    detail::require_2d(b, "matmul");
    const int m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k)
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    Tensor out = Tensor::zeros({m, n});
    detail::gemm_nn(a.data(), b.data(), out.data(), m, k, n, false);
    detail::wire(g, out, {a, b}, [ai = a.impl(), bi = b.impl(), m, k, n](TensorImpl& self) {
        if (ai->requires_grad)
            detail::gemm_nt(self.grad.data(), bi->data.data(), ai->ensure_grad().data(), m, n, k, true);
        if (bi->requires_grad)
            detail::gemm_tn(ai->data.data(), self.grad.data(), bi->ensure_grad().data(), m, k, n, true);
    });
    return out;
}

// A(m x k) * B(n x k)^T without materializing the transpose.
inline Tensor matmul_nt(Graph& g, const Tensor& a, const Tensor& b) {
    detail::require_2d(a, "matmul_nt");
    detail::require_2d(b, "matmul_nt");
    const int m = a.rows(), k = a.cols(), n = b.rows();
    if (b.cols() != k)
        throw ShapeError("matmul_nt: inner dimensions disagree, " + shape_str(a.shape()) +
                         " x transpose of " + shape_str(b.shape()));
    Tensor out = Tensor::zeros({m, n});
    detail::gemm_nt(a.data(), b.data(), out.data(), m, k, n, false);
    detail::wire(g, out, {a, b}, [ai = a.impl(), bi = b.impl(), m, k, n](TensorImpl& self) {
        if (ai->requires_grad)
            detail::gemm_nn(self.grad.data(), bi->data.data(), ai->ensure_grad().data(), m, n, k, true);
        if (bi->requires_grad)
            detail::gemm_tn(self.grad.data(), ai->data.data(), bi->ensure_grad().data(), m, n, k, true);
    });
    return out;
}

// A(k x m)^T * B(k x n) without materializing the transpose.
inline Tensor matmul_tn(Graph& g, const Tensor& a, const Tensor& b) {
    detail::require_2d(a, "matmul_tn");
    detail::require_2d(b, "matmul_tn");
    const int k = a.rows(), m = a.cols(), n = b.cols();
    if (b.rows() != k)
        throw ShapeError("matmul_tn: inner dimensions disagree, transpose of " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
    Tensor out = Tensor::zeros({m, n});
    detail::gemm_tn(a.data(), b.data(), out.data(), k, m, n, false);
    detail::wire(g, out, {a, b}, [ai = a.impl(), bi = b.impl(), k, m, n](TensorImpl& self) {
        if (ai->requires_grad)
            detail::gemm_nt(bi->data.data(), self.grad.data(), ai->ensure_grad().data(), k, n, m, true);
        if (bi->requires_grad)
            detail::gemm_nn(ai->data.data(), self.grad.data(), bi->ensure_grad().data(), k, m, n, true);
    });
    return out;
}

inline Tensor transpose(Graph& g, const Tensor& x) {
    detail::require_2d(x, "transpose");
    const int m = x.rows(), n = x.cols();
    Tensor out = Tensor::zeros({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(j, i) = x.at(i, j);
    detail::wire(g, out, {x}, [xi = x.impl(), m, n](TensorImpl& self) {
        auto& gx = xi->ensure_grad();
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < m; ++i)
                gx[static_cast<size_t>(i) * n + j] += self.grad[static_cast<size_t>(j) * m + i];
    });
    return out;
}

// ---------------------------------------------------------------------------
// Elementwise and broadcast arithmetic

namespace detail {
inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shapes disagree, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}
} // namespace detail

inline Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "add");
    Tensor out = Tensor::zeros(a.shape());
    const size_t n = a.numel();
    for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
    detail::wire(g, out, {a, b}, [ai = a.impl(), bi = b.impl(), n](TensorImpl& self) {
        if (ai->requires_grad) {
            auto& ga = ai->ensure_grad();
            for (size_t i = 0; i < n; ++i) ga[i] += self.grad[i];
        }
        if (bi->requires_grad) {
            auto& gb = bi->ensure_grad();
            for (size_t i = 0; i < n; ++i) gb[i] += self.grad[i];
        }
    });
    return out;
}

inline Tensor sub(Graph& g, const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "sub");
    Tensor out = Tensor::zeros(a.shape());
    const size_t n = a.numel();
    for (size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
    detail::wire(g, out, {a, b}, [ai = a.impl(), bi = b.impl(), n](TensorImpl& self) {
        if (ai->requires_grad) {
            auto& ga = ai->ensure_grad();
            for (size_t i = 0; i < n; ++i) ga[i] += self.grad[i];
        }
        if (bi->requires_grad) {
            auto& gb = bi->ensure_grad();
            for (size_t i = 0; i < n; ++i) gb[i] -= self.grad[i];
        }
    });
    return out;
}

inline Tensor mul(Graph& g, const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "mul");
    Tensor out = Tensor::zeros(a.shape());
    const size_t n = a.numel();
    for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
    detail::wire(g, out, {a, b}, [ai = a.impl(), bi = b.impl(), n](TensorImpl& self) {
        if (ai->requires_grad) {
            auto& ga = ai->ensure_grad();
            for (size_t i = 0; i < n; ++i) ga[i] += self.grad[i] * bi->data[i];
        }
        if (bi->requires_grad) {
            auto& gb = bi->ensure_grad();
            for (size_t i = 0; i < n; ++i) gb[i] += self.grad[i] * ai->data[i];
        }
    });
    return out;
}

inline Tensor scale(Graph& g, const Tensor& x, double c) {
    Tensor out = Tensor::zeros(x.shape());
    const size_t n = x.numel();
    for (size_t i = 0; i < n; ++i) out[i] = c * x[i];
    detail::wire(g, out, {x}, [xi = x.impl(), c, n](TensorImpl& self) {
        auto& gx = xi->ensure_grad();
        for (size_t i = 0; i < n; ++i) gx[i] += c * self.grad[i];
    });
    return out;
}

// X(m x n) + row vector b(n), broadcast over rows.
inline Tensor add_rowvec(Graph& g, const Tensor& x, const Tensor& b) {
    detail::require_2d(x, "add_rowvec");
    const int m = x.rows(), n = x.cols();
    if (static_cast<int>(b.numel()) != n)
        throw ShapeError("add_rowvec: vector " + shape_str(b.shape()) + " does not match columns of " +
                         shape_str(x.shape()));
    Tensor out = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(i, j) = x.at(i, j) + b[j];
    detail::wire(g, out, {x, b}, [xi = x.impl(), bi = b.impl(), m, n](TensorImpl& self) {
        if (xi->requires_grad) {
            auto& gx = xi->ensure_grad();
            const size_t total = static_cast<size_t>(m) * n;
            for (size_t i = 0; i < total; ++i) gx[i] += self.grad[i];
        }
        if (bi->requires_grad) {
            auto& gb = bi->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) gb[j] += self.grad[static_cast<size_t>(i) * n + j];
        }
    });
    return out;
}

// X(m x n) * row vector v(n), broadcast over rows.
inline Tensor mul_rowvec(Graph& g, const Tensor& x, const Tensor& v) {
    detail::require_2d(x, "mul_rowvec");
    const int m = x.rows(), n = x.cols();
    if (static_cast<int>(v.numel()) != n)
        throw ShapeError("mul_rowvec: vector " + shape_str(v.shape()) + " does not match columns of " +
                         shape_str(x.shape()));
    Tensor out = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(i, j) = x.at(i, j) * v[j];
    detail::wire(g, out, {x, v}, [xi = x.impl(), vi = v.impl(), m, n](TensorImpl& self) {
        if (xi->requires_grad) {
            auto& gx = xi->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    gx[static_cast<size_t>(i) * n + j] +=
                        self.grad[static_cast<size_t>(i) * n + j] * vi->data[j];
        }
        if (vi->requires_grad) {
            auto& gv = vi->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    gv[j] += self.grad[static_cast<size_t>(i) * n + j] *
                             xi->data[static_cast<size_t>(i) * n + j];
        }
    });
    return out;
}

// Scales row i of X by w[i] (w is m x 1 or flat length m).
inline Tensor scale_rows(Graph& g, const Tensor& x, const Tensor& w) {
    detail::require_2d(x, "scale_rows");
    const int m = x.rows(), n = x.cols();
    if (static_cast<int>(w.numel()) != m)
        throw ShapeError("scale_rows: weight " + shape_str(w.shape()) + " does not match rows of " +
                         shape_str(x.shape()));
    Tensor out = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(i, j) = x.at(i, j) * w[i];
    detail::wire(g, out, {x, w}, [xi = x.impl(), wi = w.impl(), m, n](TensorImpl& self) {
        if (xi->requires_grad) {
            auto& gx = xi->ensure_grad();
            for (int i = 0; i < m; ++i) {
                const double wv = wi->data[i];
                for (int j = 0; j < n; ++j)
                    gx[static_cast<size_t>(i) * n + j] += self.grad[static_cast<size_t>(i) * n + j] * wv;
            }
        }
        if (wi->requires_grad) {
            auto& gw = wi->ensure_grad();
            for (int i = 0; i < m; ++i) {
                double acc = 0.0;
                for (int j = 0; j < n; ++j)
                    acc += self.grad[static_cast<size_t>(i) * n + j] *
                           xi->data[static_cast<size_t>(i) * n + j];
                gw[i] += acc;
            }
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Nonlinearities and normalization

// Elementwise max(0, x); subgradient at 0 is 0.
inline Tensor relu(Graph& g, const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    const size_t n = x.numel();
    for (size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
    detail::wire(g, out, {x}, [xi = x.impl(), n](TensorImpl& self) {
        auto& gx = xi->ensure_grad();
        for (size_t i = 0; i < n; ++i)
            if (xi->data[i] > 0.0) gx[i] += self.grad[i];
    });
    return out;
}

// Row-wise softmax with optional keep-mask (mask entry != 0 keeps the logit,
// 0 excludes it; excluded outputs are exactly 0). Stabilized by per-row max
// subtraction over the kept entries.
inline Tensor softmax_rows(Graph& g, const Tensor& x, const Tensor& mask = Tensor()) {
    detail::require_2d(x, "softmax_rows");
    const int m = x.rows(), n = x.cols();
    if (mask.defined() && mask.shape() != x.shape())
        throw ShapeError("softmax_rows: mask " + shape_str(mask.shape()) + " does not match " +
                         shape_str(x.shape()));
    Tensor out = Tensor::zeros({m, n});
    const double* mk = mask.defined() ? mask.data() : nullptr;
    for (int i = 0; i < m; ++i) {
        const size_t off = static_cast<size_t>(i) * n;
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j)
            if (!mk || mk[off + j] != 0.0) mx = std::max(mx, x[off + j]);
        if (!std::isfinite(mx))
            throw RoutingError("softmax_rows: row " + std::to_string(i) + " is fully masked");
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            if (!mk || mk[off + j] != 0.0) {
                const double e = std::exp(x[off + j] - mx);
                out[off + j] = e;
                sum += e;
            }
        }
        for (int j = 0; j < n; ++j) out[off + j] /= sum;
    }
    detail::wire(g, out, {x}, [xi = x.impl(), m, n](TensorImpl& self) {
        auto& gx = xi->ensure_grad();
        for (int i = 0; i < m; ++i) {
            const size_t off = static_cast<size_t>(i) * n;
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += self.grad[off + j] * self.data[off + j];
            for (int j = 0; j < n; ++j)
                gx[off + j] += self.data[off + j] * (self.grad[off + j] - dot);
        }
    });
    return out;
}

// Per-row standardization followed by a learned affine map.
inline Tensor layer_norm(Graph& g, const Tensor& x, const Tensor& gain, const Tensor& bias,
                         double eps = 1e-5) {
    detail::require_2d(x, "layer_norm");
    const int m = x.rows(), n = x.cols();
    if (static_cast<int>(gain.numel()) != n || static_cast<int>(bias.numel()) != n)
        throw ShapeError("layer_norm: gain/bias length must match columns of " + shape_str(x.shape()));
    if (!(eps > 0.0)) throw ContractError("layer_norm: eps must be > 0");
    Tensor out = Tensor::zeros({m, n});
    auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(m) * n);
    auto inv_std = std::make_shared<std::vector<double>>(m);
    for (int i = 0; i < m; ++i) {
        const size_t off = static_cast<size_t>(i) * n;
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += x[off + j];
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            const double d = x[off + j] - mean;
            var += d * d;
        }
        var /= n;
        const double inv = 1.0 / std::sqrt(var + eps);
        (*inv_std)[i] = inv;
        for (int j = 0; j < n; ++j) {
            const double h = (x[off + j] - mean) * inv;
            (*xhat)[off + j] = h;
            out[off + j] = gain[j] * h + bias[j];
        }
    }
    detail::wire(g, out, {x, gain, bias},
                 [xi = x.impl(), gi = gain.impl(), bi = bias.impl(), xhat, inv_std, m,
                  n](TensorImpl& self) {
        if (gi->requires_grad) {
            auto& gg = gi->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    gg[j] += self.grad[static_cast<size_t>(i) * n + j] *
                             (*xhat)[static_cast<size_t>(i) * n + j];
        }
        if (bi->requires_grad) {
            auto& gb = bi->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) gb[j] += self.grad[static_cast<size_t>(i) * n + j];
        }
        if (xi->requires_grad) {
            auto& gx = xi->ensure_grad();
            for (int i = 0; i < m; ++i) {
                const size_t off = static_cast<size_t>(i) * n;
                double mean_dh = 0.0, mean_dh_h = 0.0;
                for (int j = 0; j < n; ++j) {
                    const double dh = self.grad[off + j] * gi->data[j];
                    mean_dh += dh;
                    mean_dh_h += dh * (*xhat)[off + j];
                }
                mean_dh /= n;
                mean_dh_h /= n;
                const double inv = (*inv_std)[i];
                for (int j = 0; j < n; ++j) {
                    const double dh = self.grad[off + j] * gi->data[j];
                    gx[off + j] += inv * (dh - mean_dh - (*xhat)[off + j] * mean_dh_h);
                }
            }
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Structural ops

inline Tensor slice_cols(Graph& g, const Tensor& x, int c0, int c1) {
    detail::require_2d(x, "slice_cols");
    const int m = x.rows(), n = x.cols();
    if (c0 < 0 || c1 > n || c0 >= c1)
        throw ShapeError("slice_cols: range [" + std::to_string(c0) + "," + std::to_string(c1) +
                         ") invalid for " + shape_str(x.shape()));
    const int w = c1 - c0;
    Tensor out = Tensor::zeros({m, w});
    for (int i = 0; i < m; ++i)
        std::memcpy(out.data() + static_cast<size_t>(i) * w, x.data() + static_cast<size_t>(i) * n + c0,
                    sizeof(double) * w);
    detail::wire(g, out, {x}, [xi = x.impl(), m, n, c0, w](TensorImpl& self) {
        auto& gx = xi->ensure_grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < w; ++j)
                gx[static_cast<size_t>(i) * n + c0 + j] += self.grad[static_cast<size_t>(i) * w + j];
    });
    return out;
}

inline Tensor concat_cols(Graph& g, const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no inputs");
    const int m = parts[0].rows();
    int n = 0;
    bool any_grad = false;
    for (const Tensor& p : parts) {
        detail::require_2d(p, "concat_cols");
        if (p.rows() != m)
            throw ShapeError("concat_cols: row counts disagree, " + shape_str(parts[0].shape()) +
                             " vs " + shape_str(p.shape()));
        n += p.cols();
        any_grad = any_grad || p.requires_grad();
    }
    Tensor out = Tensor::zeros({m, n});
    int c = 0;
    for (const Tensor& p : parts) {
        const int w = p.cols();
        for (int i = 0; i < m; ++i)
            std::memcpy(out.data() + static_cast<size_t>(i) * n + c,
                        p.data() + static_cast<size_t>(i) * w, sizeof(double) * w);
        c += w;
    }
    if (g.recording && any_grad) {
        out.set_requires_grad(true);
        auto& impl = *out.impl();
        std::vector<std::shared_ptr<TensorImpl>> parents;
        std::vector<int> widths;
        for (const Tensor& p : parts) {
            parents.push_back(p.impl());
            widths.push_back(p.cols());
        }
        impl.parents = parents;
        impl.backward_fn = [parents, widths, m, n](TensorImpl& self) {
            int c0 = 0;
            for (size_t pi = 0; pi < parents.size(); ++pi) {
                const int w = widths[pi];
                if (parents[pi]->requires_grad) {
                    auto& gp = parents[pi]->ensure_grad();
                    for (int i = 0; i < m; ++i)
                        for (int j = 0; j < w; ++j)
                            gp[static_cast<size_t>(i) * w + j] +=
                                self.grad[static_cast<size_t>(i) * n + c0 + j];
                }
                c0 += w;
            }
        };
        g.record(out.impl());
    }
    return out;
}

inline Tensor gather_rows(Graph& g, const Tensor& x, const std::vector<int>& idx) {
    detail::require_2d(x, "gather_rows");
    const int m = x.rows(), n = x.cols();
    for (int r : idx)
        if (r < 0 || r >= m)
            throw ShapeError("gather_rows: row " + std::to_string(r) + " out of range for " +
                             shape_str(x.shape()));
    Tensor out = Tensor::zeros({static_cast<int>(idx.size()), n});
    for (size_t i = 0; i < idx.size(); ++i)
        std::memcpy(out.data() + i * n, x.data() + static_cast<size_t>(idx[i]) * n, sizeof(double) * n);
    detail::wire(g, out, {x}, [xi = x.impl(), idx, n](TensorImpl& self) {
        auto& gx = xi->ensure_grad();
        for (size_t i = 0; i < idx.size(); ++i)
            for (int j = 0; j < n; ++j)
                gx[static_cast<size_t>(idx[i]) * n + j] += self.grad[i * n + j];
    });
    return out;
}

// Places row i of X at row idx[i] of an (m x n) zero matrix (adds on collision).
inline Tensor scatter_rows(Graph& g, const Tensor& x, const std::vector<int>& idx, int m) {
    detail::require_2d(x, "scatter_rows");
    const int n = x.cols();
    if (static_cast<int>(idx.size()) != x.rows())
        throw ShapeError("scatter_rows: index count does not match rows of " + shape_str(x.shape()));
    for (int r : idx)
        if (r < 0 || r >= m)
            throw ShapeError("scatter_rows: row " + std::to_string(r) + " out of range [0," +
                             std::to_string(m) + ")");
    Tensor out = Tensor::zeros({m, n});
    for (size_t i = 0; i < idx.size(); ++i)
        for (int j = 0; j < n; ++j) out.at(idx[i], j) += x[i * n + j];
    detail::wire(g, out, {x}, [xi = x.impl(), idx, n](TensorImpl& self) {
        auto& gx = xi->ensure_grad();
        for (size_t i = 0; i < idx.size(); ++i)
            for (int j = 0; j < n; ++j)
                gx[i * n + j] += self.grad[static_cast<size_t>(idx[i]) * n + j];
    });
    return out;
}

// ---------------------------------------------------------------------------
// Reductions

inline Tensor sum_all(Graph& g, const Tensor& x) {
    Tensor out = Tensor::zeros({1});
    double acc = 0.0;
    const size_t n = x.numel();
    for (size_t i = 0; i < n; ++i) acc += x[i];
    out[0] = acc;
    detail::wire(g, out, {x}, [xi = x.impl(), n](TensorImpl& self) {
        auto& gx = xi->ensure_grad();
        const double gv = self.grad[0];
        for (size_t i = 0; i < n; ++i) gx[i] += gv;
    });
    return out;
}

// Mean over rows; output is 1 x n.
inline Tensor col_mean(Graph& g, const Tensor& x) {
    detail::require_2d(x, "col_mean");
    const int m = x.rows(), n = x.cols();
    Tensor out = Tensor::zeros({1, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[j] += x.at(i, j);
    for (int j = 0; j < n; ++j) out[j] /= m;
    detail::wire(g, out, {x}, [xi = x.impl(), m, n](TensorImpl& self) {
        auto& gx = xi->ensure_grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) gx[static_cast<size_t>(i) * n + j] += self.grad[j] / m;
    });
    return out;
}

} // namespace mdfce

// SPDX-License-Identifier: Apache-2.0
//
// mdfce: dual-band massive MIMO channel extrapolation toolkit

#pragma once

#include <complex>
#include <vector>

#include "mdfce/errors.hpp"
#include "mdfce/tensor.hpp"

namespace mdfce {

using cplx = std::complex<double>;

// Dense complex matrix. For CSI the rows are BS antennas and the column
// index is u * K + k (UE-antenna-major, subcarrier-minor).
struct ComplexMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<cplx> v;

    ComplexMatrix() = default;
    ComplexMatrix(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c) {}

    cplx& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    const cplx& at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

    size_t numel() const { return v.size(); }

    double squared_norm() const {
        double s = 0.0;
        for (const cplx& z : v) s += std::norm(z);
        return s;
    }

    bool all_finite() const {
        for (const cplx& z : v)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
        return true;
    }
};

namespace detail {

// In-place radix-2 FFT (sign = -1) / inverse FFT (sign = +1), unscaled.
inline void fft_radix2(cplx* x, int n, int sign) {
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(x[i], x[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * 3.141592653589793238462643383279502884 / len;
        const cplx wl(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (int k = 0; k < len / 2; ++k) {
                const cplx u = x[i + k];
                const cplx t = w * x[i + k + len / 2];
                x[i + k] = u + t;
                x[i + k + len / 2] = u - t;
                w *= wl;
            }
        }
    }
}

// O(n^2) fallback for lengths that are not a power of two.
inline void dft_naive(cplx* x, int n, int sign) {
    std::vector<cplx> out(n);
    for (int k = 0; k < n; ++k) {
        cplx acc(0.0, 0.0);
        for (int t = 0; t < n; ++t) {
            const double ang = sign * 2.0 * 3.141592653589793238462643383279502884 * k * t / n;
            acc += x[t] * cplx(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    for (int k = 0; k < n; ++k) x[k] = out[k];
}

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

inline void transform(cplx* x, int n, int sign) {
    if (is_pow2(n))
        fft_radix2(x, n, sign);
    else
        dft_naive(x, n, sign);
}

} // namespace detail

// Unitary DFT/IDFT of length n, in place (1/sqrt(n) both directions, so the
// pair is an exact inverse and preserves energy).
inline void dft_unitary(cplx* x, int n) {
    detail::transform(x, n, -1);
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (int i = 0; i < n; ++i) x[i] *= s;
}

inline void idft_unitary(cplx* x, int n) {
    detail::transform(x, n, +1);
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (int i = 0; i < n; ++i) x[i] *= s;
}

// Applies a unitary inverse DFT of length K to each (BS antenna, UE antenna)
// row-block of K subcarrier entries, turning spatial-frequency CSI into
// spatial-delay CSI with the same layout (subcarrier index becomes tap index).
inline ComplexMatrix freq_to_time(const ComplexMatrix& h_f, int K) {
    if (K < 1 || h_f.cols % K != 0)
        throw ShapeError("freq_to_time: column count " + std::to_string(h_f.cols) +
                         " not divisible by K=" + std::to_string(K));
    ComplexMatrix h_t = h_f;
    const int blocks = h_f.cols / K;
    for (int r = 0; r < h_f.rows; ++r)
        for (int b = 0; b < blocks; ++b)
            idft_unitary(&h_t.v[static_cast<size_t>(r) * h_f.cols + static_cast<size_t>(b) * K], K);
    return h_t;
}

// Forward companion of freq_to_time; used by tests to close the round trip.
inline ComplexMatrix time_to_freq(const ComplexMatrix& h_t, int K) {
    if (K < 1 || h_t.cols % K != 0)
        throw ShapeError("time_to_freq: column count " + std::to_string(h_t.cols) +
                         " not divisible by K=" + std::to_string(K));
    ComplexMatrix h_f = h_t;
    const int blocks = h_t.cols / K;
    for (int r = 0; r < h_t.rows; ++r)
        for (int b = 0; b < blocks; ++b)
            dft_unitary(&h_f.v[static_cast<size_t>(r) * h_t.cols + static_cast<size_t>(b) * K], K);
    return h_f;
}

} // namespace mdfce

// SPDX-License-Identifier: Apache-2.0
//
// mdfce: dual-band massive MIMO channel extrapolation toolkit
//
// Pilot-based LS channel estimation with linear interpolation across
// subcarriers, and the pilot-overhead arithmetic used for comparisons.

#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "mdfce/complex_matrix.hpp"
#include "mdfce/errors.hpp"

namespace mdfce {

// Exact pilot-density fraction in (0, 1].
struct Rational {
    long long num = 1;
    long long den = 1;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }

    void validate() const {
        if (den <= 0 || num <= 0 || num > den)
            throw ContractError("Rational: pilot density must lie in (0, 1], got " + str());
    }

    std::string str() const {
        return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den);
    }

    static Rational parse(const std::string& text) {
        Rational r;
        const size_t slash = text.find('/');
        try {
            if (slash == std::string::npos) {
                // Accept decimals like "0.25" by scaling to a fraction.
                if (text.find('.') != std::string::npos) {
                    const double v = std::stod(text);
                    r.num = static_cast<long long>(v * 1000000.0 + 0.5);
                    r.den = 1000000;
                    const long long g = std::gcd(r.num, r.den);
                    if (g > 0) {
                        r.num /= g;
                        r.den /= g;
                    }
                } else {
                    r.num = std::stoll(text);
                    r.den = 1;
                }
            } else {
                r.num = std::stoll(text.substr(0, slash));
                r.den = std::stoll(text.substr(slash + 1));
            }
        } catch (const std::exception&) {
            throw ContractError("Rational: cannot parse '" + text + "'");
        }
        r.validate();
        return r;
    }
};

enum class Band { sub6, mmwave };

struct PilotConfig {
    Band band = Band::mmwave;
    Rational density{1, 1};
    // Diagonal pilot symbol per (subcarrier, UE antenna); empty means all-ones.
    // Entries are unit-modulus in the overhead-fair default.
    std::vector<cplx> symbols;

    cplx symbol(int subcarrier, int ue, int ue_antennas) const {
        if (symbols.empty()) return cplx(1.0, 0.0);
        return symbols[static_cast<size_t>(subcarrier) * ue_antennas + ue];
    }
};

// round(pd * K) pilot subcarriers, uniformly spaced, always including
// subcarrier 0 (and the last subcarrier when there are at least two pilots,
// so linear interpolation needs no extrapolation region).
inline std::vector<int> pilot_indices(const Rational& pd, int subcarriers) {
    pd.validate();
    const long long k = subcarriers;
    long long count = (2 * k * pd.num + pd.den) / (2 * pd.den); // round(K * num / den)
    count = std::max(1LL, std::min(count, k));
    std::vector<int> idx(static_cast<size_t>(count));
    if (count == 1) return idx; // {0}
    for (long long i = 0; i < count; ++i) {
        const double pos = static_cast<double>(i) * static_cast<double>(k - 1) /
                           static_cast<double>(count - 1);
        idx[static_cast<size_t>(i)] = static_cast<int>(pos + 0.5);
    }
    return idx;
}

// Realized pilot overhead: UE antennas times realized pilot subcarrier count.
inline long long pilot_overhead(const Rational& pd, int ue_antennas, int subcarriers) {
    return static_cast<long long>(ue_antennas) *
           static_cast<long long>(pilot_indices(pd, subcarriers).size());
}

// Simulated pilot observation: Y_i = H_i X_i (+ noise added by the caller)
// at the pilot subcarriers; layout mirrors the CSI matrix restricted to the
// pilot columns.
inline ComplexMatrix pilot_observation(const ComplexMatrix& h, const std::vector<int>& idx,
                                       int ue_antennas, int subcarriers,
                                       const PilotConfig& pilots) {
    const int mb = h.rows;
    ComplexMatrix y(mb, ue_antennas * static_cast<int>(idx.size()));
    for (int b = 0; b < mb; ++b)
        for (int u = 0; u < ue_antennas; ++u)
            for (size_t pi = 0; pi < idx.size(); ++pi)
                y.at(b, u * static_cast<int>(idx.size()) + static_cast<int>(pi)) =
                    h.at(b, u * subcarriers + idx[pi]) *
                    pilots.symbol(idx[pi], u, ue_antennas);
    return y;
}

// Hhat_i = Y_i X_i^{-1} per pilot subcarrier (diagonal pilots).
inline ComplexMatrix ls_estimate(const ComplexMatrix& y_pilots, const std::vector<int>& idx,
                                 int ue_antennas, const PilotConfig& pilots) {
    const int np = static_cast<int>(idx.size());
    if (y_pilots.cols != ue_antennas * np)
        throw ShapeError("ls_estimate: observation " + std::to_string(y_pilots.cols) +
                         " columns, expected " + std::to_string(ue_antennas * np));
    ComplexMatrix h = y_pilots;
    for (int u = 0; u < ue_antennas; ++u)
        for (int pi = 0; pi < np; ++pi) {
            const cplx x = pilots.symbol(idx[pi], u, ue_antennas);
            if (std::norm(x) == 0.0)
                throw ContractError("ls_estimate: singular pilot symbol at subcarrier " +
                                    std::to_string(idx[pi]));
            for (int b = 0; b < h.rows; ++b) h.at(b, u * np + pi) /= x;
        }
    return h;
}

// Linear interpolation of real and imaginary parts between adjacent pilots,
// constant extension beyond the first/last pilot.
inline ComplexMatrix interpolate_pilots(const ComplexMatrix& h_at_pilots,
                                        const std::vector<int>& pilot_idx, int subcarriers,
                                        int ue_antennas) {
    if (pilot_idx.empty()) throw ContractError("interpolate_pilots: no pilot indices");
    const int np = static_cast<int>(pilot_idx.size());
    if (h_at_pilots.cols != ue_antennas * np)
        throw ShapeError("interpolate_pilots: estimate has " + std::to_string(h_at_pilots.cols) +
                         " columns, expected " + std::to_string(ue_antennas * np));
    ComplexMatrix out(h_at_pilots.rows, ue_antennas * subcarriers);
    for (int b = 0; b < h_at_pilots.rows; ++b) {
        for (int u = 0; u < ue_antennas; ++u) {
            const cplx* src = &h_at_pilots.v[static_cast<size_t>(b) * h_at_pilots.cols +
                                             static_cast<size_t>(u) * np];
            cplx* dst = &out.v[static_cast<size_t>(b) * out.cols + static_cast<size_t>(u) * subcarriers];
            int seg = 0;
            for (int k = 0; k < subcarriers; ++k) {
                if (k <= pilot_idx.front()) {
                    dst[k] = src[0];
                    continue;
                }
                if (k >= pilot_idx.back()) {
                    dst[k] = src[np - 1];
                    continue;
                }
                while (seg + 1 < np && pilot_idx[seg + 1] < k) ++seg;
                const int k0 = pilot_idx[seg], k1 = pilot_idx[seg + 1];
                const double w = static_cast<double>(k - k0) / static_cast<double>(k1 - k0);
                dst[k] = src[seg] * (1.0 - w) + src[seg + 1] * w;
            }
        }
    }
    return out;
}

} // namespace mdfce

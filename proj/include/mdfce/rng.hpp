// SPDX-License-Identifier: Apache-2.0
//
// mdfce: dual-band massive MIMO channel extrapolation toolkit

#pragma once

#include <cmath>
#include <cstdint>

namespace mdfce {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Mixes a base seed with up to two stream tags. Used to give every sample,
// epoch and noise draw its own independent, reproducible stream.
inline uint64_t derive_seed(uint64_t base, uint64_t tag_a, uint64_t tag_b = 0) {
    uint64_t s = base;
    uint64_t h = splitmix64(s);
    s ^= tag_a * 0x9e3779b97f4a7c15ULL + h;
    h = splitmix64(s);
    s ^= tag_b * 0xc2b2ae3d27d4eb4fULL + h;
    return splitmix64(s);
}

// Deterministic PRNG with hand-rolled distributions. std::* distributions
// are implementation-defined, which would break the bit-reproducibility
// contract of dataset regeneration.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; the spare value is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double exponential(double mean) { return -mean * std::log1p(-uniform()); }

    // Exponential with the given mean, conditioned on being < limit.
    // Inverse-CDF form, so one uniform draw per sample (no rejection loop).
    double truncated_exponential(double mean, double limit) {
        const double cdf_at_limit = -std::expm1(-limit / mean);
        return -mean * std::log1p(-uniform() * cdf_at_limit);
    }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) { return next_u64() % n; }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace mdfce

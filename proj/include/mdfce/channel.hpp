// SPDX-License-Identifier: Apache-2.0
//
// mdfce: dual-band massive MIMO channel extrapolation toolkit
//
// Synthetic dual-band channel generator. Both bands share one multipath
// geometry (angles + delays); the mmWave band keeps the strongest paths and
// a power-scaled copy of their gains, which is what makes the cross-band
// mapping identifiable in the first place (an extrapolator cannot predict
// per-band randomness that is independent of its input).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mdfce/complex_matrix.hpp"
#include "mdfce/errors.hpp"
#include "mdfce/rng.hpp"

namespace mdfce {

struct BandConfig {
    int bs_antennas = 1;
    int ue_antennas = 1;
    int subcarriers = 1;
    double carrier_freq_hz = 0.0;
    double bandwidth_hz = 0.0;
    int num_paths = 1;
    double antenna_spacing_wavelengths = 0.5;

    // OFDM symbol duration = 1 / subcarrier spacing.
    double symbol_duration_s() const { return subcarriers / bandwidth_hz; }

    void validate() const {
        if (bs_antennas < 1 || ue_antennas < 1 || subcarriers < 1 || num_paths < 1)
            throw ContractError("BandConfig: all counts must be >= 1");
        if (!(bandwidth_hz > 0.0) || !(carrier_freq_hz > 0.0))
            throw ContractError("BandConfig: carrier frequency and bandwidth must be > 0");
    }
};

// Virtual propagation scene: one fixed base station and a fixed scatterer
// constellation; each sample draws only a UE position. Channels are then a
// smooth function of that position, which is the property of the ray-traced
// dataset this generator stands in for (an extrapolator interpolates the
// field; it cannot invert per-sample i.i.d. path randomness).
struct SceneConfig {
    uint64_t scene_seed = 2024;   // fixes the scatterer constellation
    double ue_x_min_m = 20.0, ue_x_max_m = 60.0;
    double ue_y_min_m = -20.0, ue_y_max_m = 20.0;
    double scat_x_min_m = 8.0, scat_x_max_m = 55.0;
    double scat_y_min_m = -12.0, scat_y_max_m = 12.0;
    double max_excess_delay_s = 65e-9; // detours are scaled into this window

    void validate() const {
        if (!(ue_x_max_m > ue_x_min_m) || !(ue_y_max_m > ue_y_min_m) ||
            !(scat_x_max_m > scat_x_min_m) || !(scat_y_max_m > scat_y_min_m))
            throw ContractError("SceneConfig: empty placement box");
        if (!(max_excess_delay_s > 0.0))
            throw ContractError("SceneConfig: max_excess_delay_s must be > 0");
    }
};

struct SystemConfig {
    BandConfig sub6;
    BandConfig mmwave;
    SceneConfig scene;

    // mmWave per-path power relative to sub-6, in dB (severe path loss).
    double mmwave_path_gain_db = -20.0;

    void validate() const {
        sub6.validate();
        mmwave.validate();
        scene.validate();
        if (mmwave.num_paths > sub6.num_paths)
            throw ContractError("SystemConfig: mmWave path count cannot exceed sub-6 path count");
        const double t_min = std::min(sub6.symbol_duration_s(), mmwave.symbol_duration_s());
        if (!(scene.max_excess_delay_s < t_min))
            throw ContractError("SystemConfig: max excess delay must stay below the symbol duration");
    }

    // Table-default dual-band setup: 3.5 GHz / 40 MHz / 128 subcarriers with
    // 15 paths uplink, 28 GHz / 123 MHz / 256 subcarriers with 5 paths downlink.
    static SystemConfig defaults() {
        SystemConfig cfg;
        cfg.sub6 = {16, 2, 128, 3.5e9, 40e6, 15, 0.5};
        cfg.mmwave = {32, 2, 256, 28e9, 123e6, 5, 0.5};
        return cfg;
    }
};

struct Path {
    double aod_rad = 0.0;   // azimuth of departure (BS side)
    double aoa_rad = 0.0;   // azimuth of arrival (UE side)
    double delay_s = 0.0;
    cplx gain_sub6{0.0, 0.0};
    cplx gain_mmwave{0.0, 0.0};
};

// Shared propagation geometry, sorted by descending |gain_sub6|.
struct PathSet {
    std::vector<Path> paths;
};

struct DualBandSample {
    ComplexMatrix h_sub6;   // M_B^s x (M_U^s * K^s)
    ComplexMatrix h_mmwave; // M_B^m x (M_U^m * K^m)
    uint64_t seed = 0;
};

// Uniform linear array response: element t = exp(j*2*pi*spacing*t*sin(angle)).
inline std::vector<cplx> steering_vector(int n_antennas, double angle_rad,
                                         double spacing_wavelengths) {
    if (n_antennas < 1) throw ContractError("steering_vector: need at least one antenna");
    std::vector<cplx> a(n_antennas);
    const double phase_step = 2.0 * 3.141592653589793238462643383279502884 * spacing_wavelengths *
                              std::sin(angle_rad);
    for (int t = 0; t < n_antennas; ++t) a[t] = std::polar(1.0, phase_step * t);
    return a;
}

namespace detail {

// Scatterer constellation fixed by the scene seed: position, reflection
// amplitude and a reflection phase per scatterer.
struct Scatterer {
    double x, y;
    double amp;
    double phase;
};

inline std::vector<Scatterer> scene_scatterers(const SceneConfig& scene, int count) {
    Rng rng(derive_seed(scene.scene_seed, 0x7363656e /* "scen" */));
    std::vector<Scatterer> s(static_cast<size_t>(count));
    for (Scatterer& sc : s) {
        sc.x = rng.uniform(scene.scat_x_min_m, scene.scat_x_max_m);
        sc.y = rng.uniform(scene.scat_y_min_m, scene.scat_y_max_m);
        sc.amp = rng.uniform(0.35, 0.9);
        sc.phase = rng.uniform(0.0, 6.283185307179586476925286766559);
    }
    return s;
}

} // namespace detail

// One shared PathSet from the virtual scene. The BS sits at the origin; the
// UE position is the only per-sample randomness, so geometry (and with it
// both bands' CSI) is a smooth deterministic field over the UE box. Delays
// are measured as excess over the line-of-sight path (synchronized receiver)
// and compressed into the configured excess-delay window.
inline PathSet draw_path_set(const SystemConfig& cfg, uint64_t seed) {
    Rng rng(derive_seed(seed, 0x70617468 /* "path" */));
    const SceneConfig& sc = cfg.scene;
    const double ue_x = rng.uniform(sc.ue_x_min_m, sc.ue_x_max_m);
    const double ue_y = rng.uniform(sc.ue_y_min_m, sc.ue_y_max_m);

    const int n_paths = cfg.sub6.num_paths;
    const auto scatterers = detail::scene_scatterers(sc, n_paths - 1);

    // Worst-case detour over the UE box fixes the delay compression scale.
    double max_detour = 1e-9;
    for (const auto& s : scatterers) {
        const double corner_x[2] = {sc.ue_x_min_m, sc.ue_x_max_m};
        const double corner_y[2] = {sc.ue_y_min_m, sc.ue_y_max_m};
        for (double cx : corner_x)
            for (double cy : corner_y) {
                const double d_bs = std::hypot(s.x, s.y);
                const double d_ue = std::hypot(cx - s.x, cy - s.y);
                const double los = std::max(1.0, std::hypot(cx, cy));
                max_detour = std::max(max_detour, d_bs + d_ue - los);
            }
    }
    const double delay_scale = sc.max_excess_delay_s / max_detour;
    const double mm_amp = std::pow(10.0, cfg.mmwave_path_gain_db / 20.0);
    const double los_dist = std::max(1.0, std::hypot(ue_x, ue_y));

    PathSet ps;
    ps.paths.reserve(static_cast<size_t>(n_paths));
    {
        Path los;
        los.aod_rad = std::atan2(ue_y, ue_x);
        los.aoa_rad = std::atan2(-ue_y, -ue_x);
        los.delay_s = 0.0;
        los.gain_sub6 = cplx(10.0 / los_dist, 0.0);
        los.gain_mmwave = mm_amp * los.gain_sub6;
        ps.paths.push_back(los);
    }
    for (const auto& s : scatterers) {
        const double d_bs = std::max(1.0, std::hypot(s.x, s.y));
        const double d_ue = std::max(1.0, std::hypot(ue_x - s.x, ue_y - s.y));
        Path p;
        p.aod_rad = std::atan2(s.y, s.x);
        p.aoa_rad = std::atan2(s.y - ue_y, s.x - ue_x);
        p.delay_s = std::max(0.0, (d_bs + d_ue - los_dist) * delay_scale);
        p.gain_sub6 = std::polar(10.0 * s.amp / std::sqrt(d_bs * d_ue), s.phase);
        p.gain_mmwave = mm_amp * p.gain_sub6;
        ps.paths.push_back(p);
    }
    std::sort(ps.paths.begin(), ps.paths.end(),
              [](const Path& a, const Path& b) { return std::abs(a.gain_sub6) > std::abs(b.gain_sub6); });
    return ps;
}

namespace detail {

// H_k = sum_p gain_p * a_bs(aod_p) * a_ue(aoa_p)^H * exp(-j*2*pi*df_k*tau_p),
// with df_k = (k - K/2) * BW / K the subcarrier offset from the carrier.
// Carrier phase is absorbed into the per-band path gain (baseband-equivalent
// convention), so the cross-band map depends on delays only through the
// band-limited phase ramps.
inline ComplexMatrix synth_band(const BandConfig& band, const PathSet& ps, int n_paths,
                                bool use_mmwave_gain) {
    const int mb = band.bs_antennas, mu = band.ue_antennas, K = band.subcarriers;
    ComplexMatrix h(mb, mu * K);
    const double two_pi = 2.0 * 3.141592653589793238462643383279502884;

    for (int p = 0; p < n_paths; ++p) {
        const Path& path = ps.paths[p];
        const cplx gain = use_mmwave_gain ? path.gain_mmwave : path.gain_sub6;
        const auto a_bs = steering_vector(mb, path.aod_rad, band.antenna_spacing_wavelengths);
        const auto a_ue = steering_vector(mu, path.aoa_rad, band.antenna_spacing_wavelengths);
        std::vector<cplx> phase(K);
        for (int k = 0; k < K; ++k) {
            const double df = (k - K / 2) * band.bandwidth_hz / K;
            phase[k] = std::polar(1.0, -two_pi * df * path.delay_s);
        }
        for (int b = 0; b < mb; ++b) {
            for (int u = 0; u < mu; ++u) {
                const cplx c = gain * a_bs[b] * std::conj(a_ue[u]);
                cplx* row = &h.v[static_cast<size_t>(b) * h.cols + static_cast<size_t>(u) * K];
                for (int k = 0; k < K; ++k) row[k] += c * phase[k];
            }
        }
    }
    return h;
}

} // namespace detail

// One paired (sub-6 GHz, mmWave) CSI record from a shared PathSet.
// Bit-identical for identical (cfg, seed).
inline DualBandSample generate_sample(const SystemConfig& cfg, uint64_t seed) {
    cfg.validate();
    const PathSet ps = draw_path_set(cfg, seed);
    DualBandSample s;
    s.seed = seed;
    s.h_sub6 = detail::synth_band(cfg.sub6, ps, cfg.sub6.num_paths, false);
    s.h_mmwave = detail::synth_band(cfg.mmwave, ps, cfg.mmwave.num_paths, true);
    return s;
}

// h + circular complex Gaussian noise with per-element variance
// mean(|h|^2) / 10^(snr_db/10). snr_db = +inf returns h unchanged.
inline ComplexMatrix apply_awgn(const ComplexMatrix& h, double snr_db, uint64_t seed) {
    if (std::isinf(snr_db) && snr_db > 0) return h;
    const double power = h.squared_norm() / static_cast<double>(h.numel());
    if (!(power > 0.0))
        throw ContractError("apply_awgn: all-zero input, SNR undefined");
    const double noise_var = power / std::pow(10.0, snr_db / 10.0);
    const double amp = std::sqrt(noise_var / 2.0);
    Rng rng(derive_seed(seed, 0x6177676e /* "awgn" */));
    ComplexMatrix out = h;
    for (cplx& z : out.v) z += cplx(amp * rng.normal(), amp * rng.normal());
    return out;
}

// ---------------------------------------------------------------------------
// Text round trip for SystemConfig (shared by the dataset header, checkpoint
// manifest and run-config files).

namespace detail {

inline void put_band(std::ostringstream& os, const std::string& prefix, const BandConfig& b) {
    os << prefix << ".bs_antennas=" << b.bs_antennas << "\n";
    os << prefix << ".ue_antennas=" << b.ue_antennas << "\n";
    os << prefix << ".subcarriers=" << b.subcarriers << "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", b.carrier_freq_hz);
    os << prefix << ".carrier_freq_hz=" << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", b.bandwidth_hz);
    os << prefix << ".bandwidth_hz=" << buf << "\n";
    os << prefix << ".num_paths=" << b.num_paths << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", b.antenna_spacing_wavelengths);
    os << prefix << ".antenna_spacing_wavelengths=" << buf << "\n";
}

} // namespace detail

inline std::string system_config_to_text(const SystemConfig& cfg) {
    std::ostringstream os;
    detail::put_band(os, "sub6", cfg.sub6);
    detail::put_band(os, "mmwave", cfg.mmwave);
    char buf[64];
    auto putd = [&](const char* key, double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << key << "=" << buf << "\n";
    };
    putd("mmwave_path_gain_db", cfg.mmwave_path_gain_db);
    os << "scene.seed=" << cfg.scene.scene_seed << "\n";
    putd("scene.ue_x_min_m", cfg.scene.ue_x_min_m);
    putd("scene.ue_x_max_m", cfg.scene.ue_x_max_m);
    putd("scene.ue_y_min_m", cfg.scene.ue_y_min_m);
    putd("scene.ue_y_max_m", cfg.scene.ue_y_max_m);
    putd("scene.scat_x_min_m", cfg.scene.scat_x_min_m);
    putd("scene.scat_x_max_m", cfg.scene.scat_x_max_m);
    putd("scene.scat_y_min_m", cfg.scene.scat_y_min_m);
    putd("scene.scat_y_max_m", cfg.scene.scat_y_max_m);
    putd("scene.max_excess_delay_s", cfg.scene.max_excess_delay_s);
    return os.str();
}

inline SystemConfig system_config_from_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        const size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto geti = [&](const std::string& k) {
        auto it = kv.find(k);
        if (it == kv.end()) throw FormatError("SystemConfig text: missing key " + k);
        return std::stoi(it->second);
    };
    auto getd = [&](const std::string& k) {
        auto it = kv.find(k);
        if (it == kv.end()) throw FormatError("SystemConfig text: missing key " + k);
        return std::stod(it->second);
    };
    auto band = [&](const std::string& p) {
        BandConfig b;
        b.bs_antennas = geti(p + ".bs_antennas");
        b.ue_antennas = geti(p + ".ue_antennas");
        b.subcarriers = geti(p + ".subcarriers");
        b.carrier_freq_hz = getd(p + ".carrier_freq_hz");
        b.bandwidth_hz = getd(p + ".bandwidth_hz");
        b.num_paths = geti(p + ".num_paths");
        b.antenna_spacing_wavelengths = getd(p + ".antenna_spacing_wavelengths");
        return b;
    };
    SystemConfig cfg;
    cfg.sub6 = band("sub6");
    cfg.mmwave = band("mmwave");
    cfg.mmwave_path_gain_db = getd("mmwave_path_gain_db");
    {
        auto it = kv.find("scene.seed");
        if (it == kv.end()) throw FormatError("SystemConfig text: missing key scene.seed");
        cfg.scene.scene_seed = static_cast<uint64_t>(std::stoull(it->second));
    }
    cfg.scene.ue_x_min_m = getd("scene.ue_x_min_m");
    cfg.scene.ue_x_max_m = getd("scene.ue_x_max_m");
    cfg.scene.ue_y_min_m = getd("scene.ue_y_min_m");
    cfg.scene.ue_y_max_m = getd("scene.ue_y_max_m");
    cfg.scene.scat_x_min_m = getd("scene.scat_x_min_m");
    cfg.scene.scat_x_max_m = getd("scene.scat_x_max_m");
    cfg.scene.scat_y_min_m = getd("scene.scat_y_min_m");
    cfg.scene.scat_y_max_m = getd("scene.scat_y_max_m");
    cfg.scene.max_excess_delay_s = getd("scene.max_excess_delay_s");
    return cfg;
}

inline bool operator==(const BandConfig& a, const BandConfig& b) {
    return a.bs_antennas == b.bs_antennas && a.ue_antennas == b.ue_antennas &&
           a.subcarriers == b.subcarriers && a.carrier_freq_hz == b.carrier_freq_hz &&
           a.bandwidth_hz == b.bandwidth_hz && a.num_paths == b.num_paths &&
           a.antenna_spacing_wavelengths == b.antenna_spacing_wavelengths;
}

inline bool operator==(const SceneConfig& a, const SceneConfig& b) {
    return a.scene_seed == b.scene_seed && a.ue_x_min_m == b.ue_x_min_m &&
           a.ue_x_max_m == b.ue_x_max_m && a.ue_y_min_m == b.ue_y_min_m &&
           a.ue_y_max_m == b.ue_y_max_m && a.scat_x_min_m == b.scat_x_min_m &&
           a.scat_x_max_m == b.scat_x_max_m && a.scat_y_min_m == b.scat_y_min_m &&
           a.scat_y_max_m == b.scat_y_max_m && a.max_excess_delay_s == b.max_excess_delay_s;
}

inline bool operator==(const SystemConfig& a, const SystemConfig& b) {
    return a.sub6 == b.sub6 && a.mmwave == b.mmwave && a.scene == b.scene &&
           a.mmwave_path_gain_db == b.mmwave_path_gain_db;
}

} // namespace mdfce

// SPDX-License-Identifier: Apache-2.0
//
// Channel simulator: steering vectors, paired sample generation, AWGN,
// frequency/delay transforms, dataset file round trips.

#include <cmath>
#include <cstdio>

#include "gtest/gtest.h"
#include "mdfce/channel.hpp"
#include "mdfce/dataset_io.hpp"

using namespace mdfce;

namespace {

SystemConfig tiny_config() {
    SystemConfig cfg;
    cfg.sub6 = {4, 2, 32, 3.5e9, 40e6, 6, 0.5};
    cfg.mmwave = {8, 2, 64, 28e9, 123e6, 3, 0.5};
    return cfg;
}

} // namespace

TEST(SteeringVector, BroadsideAndEndfire) {
    auto broadside = steering_vector(2, 0.0, 0.5);
    EXPECT_NEAR(std::abs(broadside[0] - cplx(1, 0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(broadside[1] - cplx(1, 0)), 0.0, 1e-15);

    auto endfire = steering_vector(2, 1.5707963267948966, 0.5);
    EXPECT_NEAR(std::abs(endfire[0] - cplx(1, 0)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(endfire[1] - cplx(-1, 0)), 0.0, 1e-12);

    auto single = steering_vector(1, 0.7, 0.5);
    ASSERT_EQ(single.size(), 1u);
    EXPECT_NEAR(std::abs(single[0] - cplx(1, 0)), 0.0, 1e-15);
}

TEST(GenerateSample, SinglePathZeroDelayIsFlatAndRankOne) {
    BandConfig band{3, 2, 16, 3.5e9, 40e6, 1, 0.5};
    PathSet ps;
    Path p;
    p.aod_rad = 0.4;
    p.aoa_rad = -0.9;
    p.delay_s = 0.0;
    p.gain_sub6 = cplx(1.0, 0.0);
    ps.paths.push_back(p);
    const ComplexMatrix h = detail::synth_band(band, ps, 1, false);

    // Identical per-subcarrier blocks.
    for (int b = 0; b < 3; ++b)
        for (int u = 0; u < 2; ++u)
            for (int k = 1; k < 16; ++k)
                EXPECT_NEAR(std::abs(h.at(b, u * 16 + k) - h.at(b, u * 16)), 0.0, 1e-12);

    // Rank 1: every 2x2 minor of the per-subcarrier matrix vanishes.
    for (int k = 0; k < 16; ++k) {
        const cplx det =
            h.at(0, 0 * 16 + k) * h.at(1, 1 * 16 + k) - h.at(0, 1 * 16 + k) * h.at(1, 0 * 16 + k);
        EXPECT_NEAR(std::abs(det), 0.0, 1e-12);
    }
}

TEST(GenerateSample, TableDefaultsPathCounts) {
    const SystemConfig cfg = SystemConfig::defaults();
    EXPECT_EQ(cfg.sub6.num_paths, 15);
    EXPECT_EQ(cfg.mmwave.num_paths, 5);
    EXPECT_EQ(cfg.sub6.subcarriers, 128);
    EXPECT_EQ(cfg.mmwave.subcarriers, 256);
    EXPECT_EQ(cfg.sub6.bs_antennas, 16);
    EXPECT_EQ(cfg.mmwave.bs_antennas, 32);

    const PathSet ps = draw_path_set(cfg, 42);
    EXPECT_EQ(ps.paths.size(), 15u);
}

TEST(GenerateSample, DeterministicAndFinite) {
    const SystemConfig cfg = tiny_config();
    const DualBandSample a = generate_sample(cfg, 123);
    const DualBandSample b = generate_sample(cfg, 123);
    ASSERT_EQ(a.h_sub6.v.size(), b.h_sub6.v.size());
    for (size_t i = 0; i < a.h_sub6.v.size(); ++i) EXPECT_EQ(a.h_sub6.v[i], b.h_sub6.v[i]);
    for (size_t i = 0; i < a.h_mmwave.v.size(); ++i) EXPECT_EQ(a.h_mmwave.v[i], b.h_mmwave.v[i]);
    EXPECT_EQ(a.h_sub6.rows, 4);
    EXPECT_EQ(a.h_sub6.cols, 2 * 32);
    EXPECT_EQ(a.h_mmwave.rows, 8);
    EXPECT_EQ(a.h_mmwave.cols, 2 * 64);
}

TEST(GenerateSample, FiniteOverManySeeds) {
    const SystemConfig cfg = tiny_config();
    for (uint64_t seed = 0; seed < 10000; ++seed) {
        const DualBandSample s = generate_sample(cfg, seed);
        ASSERT_TRUE(s.h_sub6.all_finite()) << "seed " << seed;
        ASSERT_TRUE(s.h_mmwave.all_finite()) << "seed " << seed;
    }
}

TEST(GenerateSample, SharedGeometryAcrossBands) {
    const SystemConfig cfg = tiny_config();
    const double t_limit = std::min(cfg.sub6.symbol_duration_s(), cfg.mmwave.symbol_duration_s());
    const double mm_scale = std::pow(10.0, cfg.mmwave_path_gain_db / 20.0);
    for (uint64_t seed = 0; seed < 1000; ++seed) {
        const PathSet ps = draw_path_set(cfg, seed);
        ASSERT_EQ(ps.paths.size(), static_cast<size_t>(cfg.sub6.num_paths));
        for (size_t p = 0; p < ps.paths.size(); ++p) {
            if (p > 0)
                EXPECT_GE(std::abs(ps.paths[p - 1].gain_sub6), std::abs(ps.paths[p].gain_sub6));
            EXPECT_GE(ps.paths[p].delay_s, 0.0);
            EXPECT_LT(ps.paths[p].delay_s, t_limit);
            // The mmWave band reuses the same geometry and a scaled gain.
            EXPECT_NEAR(std::abs(ps.paths[p].gain_mmwave - mm_scale * ps.paths[p].gain_sub6), 0.0,
                        1e-15);
        }
    }
}

TEST(ApplyAwgn, InfiniteSnrIsIdentity) {
    const DualBandSample s = generate_sample(tiny_config(), 5);
    const ComplexMatrix out =
        apply_awgn(s.h_sub6, std::numeric_limits<double>::infinity(), 99);
    for (size_t i = 0; i < out.v.size(); ++i) EXPECT_EQ(out.v[i], s.h_sub6.v[i]);
}

TEST(ApplyAwgn, EmpiricalSnrWithinTenthDb) {
    // >= 1e5 elements at 10 dB target.
    ComplexMatrix h(100, 1000);
    Rng rng(7);
    for (cplx& z : h.v) z = cplx(rng.normal(), rng.normal());
    const double target_db = 10.0;
    const ComplexMatrix noisy = apply_awgn(h, target_db, 31);
    double sig = 0.0, noise = 0.0;
    for (size_t i = 0; i < h.v.size(); ++i) {
        sig += std::norm(h.v[i]);
        noise += std::norm(noisy.v[i] - h.v[i]);
    }
    const double snr_db = 10.0 * std::log10(sig / noise);
    EXPECT_NEAR(snr_db, target_db, 0.1);
}

TEST(ApplyAwgn, SeedContract) {
    const DualBandSample s = generate_sample(tiny_config(), 6);
    const ComplexMatrix a = apply_awgn(s.h_sub6, 5.0, 11);
    const ComplexMatrix b = apply_awgn(s.h_sub6, 5.0, 11);
    const ComplexMatrix c = apply_awgn(s.h_sub6, 5.0, 12);
    double diff_ab = 0.0, diff_ac = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) {
        diff_ab += std::norm(a.v[i] - b.v[i]);
        diff_ac += std::norm(a.v[i] - c.v[i]);
    }
    EXPECT_EQ(diff_ab, 0.0);
    EXPECT_GT(diff_ac, 0.0);
}

TEST(ApplyAwgn, NoiseAveragesOut) {
    const DualBandSample s = generate_sample(tiny_config(), 8);
    ComplexMatrix mean(s.h_sub6.rows, s.h_sub6.cols);
    const int trials = 2000;
    for (int t = 0; t < trials; ++t) {
        const ComplexMatrix noisy = apply_awgn(s.h_sub6, 0.0, 1000 + t);
        for (size_t i = 0; i < mean.v.size(); ++i) mean.v[i] += noisy.v[i] / double(trials);
    }
    double err = 0.0;
    for (size_t i = 0; i < mean.v.size(); ++i) err += std::norm(mean.v[i] - s.h_sub6.v[i]);
    // At 0 dB SNR the averaged residual is ~1/trials of the signal power.
    EXPECT_LT(err / s.h_sub6.squared_norm(), 3.0 / trials);
}

TEST(ApplyAwgn, AllZeroInputRejected) {
    ComplexMatrix h(2, 2);
    EXPECT_THROW(apply_awgn(h, 10.0, 1), ContractError);
}

TEST(FreqToTime, RoundTripAndEnergy) {
    const SystemConfig cfg = tiny_config();
    const DualBandSample s = generate_sample(cfg, 77);
    const ComplexMatrix h_t = freq_to_time(s.h_sub6, cfg.sub6.subcarriers);
    const ComplexMatrix back = time_to_freq(h_t, cfg.sub6.subcarriers);
    double max_err = 0.0;
    for (size_t i = 0; i < back.v.size(); ++i)
        max_err = std::max(max_err, std::abs(back.v[i] - s.h_sub6.v[i]));
    EXPECT_LT(max_err, 1e-10);

    const double e_in = s.h_sub6.squared_norm();
    const double e_out = h_t.squared_norm();
    EXPECT_LT(std::fabs(e_in - e_out) / e_in, 1e-10);
}

TEST(FreqToTime, ConstantRowGivesImpulseAtTapZero) {
    ComplexMatrix h(1, 8);
    for (cplx& z : h.v) z = cplx(2.0, -1.0);
    const ComplexMatrix h_t = freq_to_time(h, 8);
    EXPECT_NEAR(std::abs(h_t.at(0, 0) - std::sqrt(8.0) * cplx(2.0, -1.0)), 0.0, 1e-12);
    for (int k = 1; k < 8; ++k) EXPECT_NEAR(std::abs(h_t.at(0, k)), 0.0, 1e-12);
}

TEST(FreqToTime, Linearity) {
    const SystemConfig cfg = tiny_config();
    const DualBandSample s1 = generate_sample(cfg, 1);
    const DualBandSample s2 = generate_sample(cfg, 2);
    const int K = cfg.sub6.subcarriers;
    ComplexMatrix combo = s1.h_sub6;
    for (size_t i = 0; i < combo.v.size(); ++i)
        combo.v[i] = 0.75 * s1.h_sub6.v[i] + cplx(0, 1.5) * s2.h_sub6.v[i];
    const ComplexMatrix lhs = freq_to_time(combo, K);
    const ComplexMatrix t1 = freq_to_time(s1.h_sub6, K);
    const ComplexMatrix t2 = freq_to_time(s2.h_sub6, K);
    for (size_t i = 0; i < lhs.v.size(); ++i)
        EXPECT_NEAR(std::abs(lhs.v[i] - (0.75 * t1.v[i] + cplx(0, 1.5) * t2.v[i])), 0.0, 1e-12);
}

TEST(FreqToTime, NonDivisibleColumnsRejected) {
    ComplexMatrix h(2, 10);
    EXPECT_THROW(freq_to_time(h, 4), ShapeError);
}

TEST(FreqToTime, NonPowerOfTwoLengthStillUnitary) {
    ComplexMatrix h(1, 12);
    Rng rng(3);
    for (cplx& z : h.v) z = cplx(rng.normal(), rng.normal());
    const ComplexMatrix back = time_to_freq(freq_to_time(h, 12), 12);
    for (size_t i = 0; i < h.v.size(); ++i) EXPECT_NEAR(std::abs(back.v[i] - h.v[i]), 0.0, 1e-10);
}

TEST(DatasetIo, RoundTripBitIdenticalAtF32) {
    const SystemConfig cfg = tiny_config();
    std::vector<DualBandSample> samples;
    for (uint64_t i = 0; i < 5; ++i) samples.push_back(generate_sample(cfg, 100 + i));
    const std::string path = testing::TempDir() + "roundtrip.mdfc";
    write_dataset(cfg, samples, path);
    const Dataset ds = read_dataset(path);
    EXPECT_TRUE(ds.config == cfg);
    ASSERT_EQ(ds.samples.size(), samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        EXPECT_EQ(ds.samples[i].seed, samples[i].seed);
        for (size_t j = 0; j < samples[i].h_sub6.v.size(); ++j) {
            EXPECT_EQ(static_cast<float>(samples[i].h_sub6.v[j].real()),
                      static_cast<float>(ds.samples[i].h_sub6.v[j].real()));
            EXPECT_EQ(static_cast<float>(samples[i].h_sub6.v[j].imag()),
                      static_cast<float>(ds.samples[i].h_sub6.v[j].imag()));
        }
    }
    std::remove(path.c_str());
}

TEST(DatasetIo, EmptySequenceRejected) {
    EXPECT_THROW(write_dataset(tiny_config(), {}, testing::TempDir() + "none.mdfc"),
                 ContractError);
}

TEST(DatasetIo, BadMagicAndTruncationAreFormatErrors) {
    const SystemConfig cfg = tiny_config();
    const std::string path = testing::TempDir() + "corrupt.mdfc";
    write_dataset(cfg, {generate_sample(cfg, 1)}, path);

    auto bytes = detail::read_file_bytes(path);
    auto mangled = bytes;
    mangled[0] = 'X';
    detail::write_file_bytes_atomic(path, mangled);
    EXPECT_THROW(read_dataset(path), FormatError);

    auto truncated = bytes;
    truncated.resize(bytes.size() - 32);
    detail::write_file_bytes_atomic(path, truncated);
    try {
        read_dataset(path);
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("byte offset"), std::string::npos);
    }
    std::remove(path.c_str());
}

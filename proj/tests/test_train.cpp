// SPDX-License-Identifier: Apache-2.0
//
// Losses, AdamW, learning-rate schedule, normalization stats, training loop.

#include <cmath>

#include "gtest/gtest.h"
#include "mdfce/eval.hpp"
#include "mdfce/train.hpp"

using namespace mdfce;

namespace {

SystemConfig tiny_sys() {
    SystemConfig cfg;
    cfg.sub6 = {2, 2, 8, 3.5e9, 40e6, 4, 0.5};
    cfg.mmwave = {4, 2, 16, 28e9, 123e6, 2, 0.5};
    return cfg;
}

ModelConfig tiny_model_cfg() {
    ModelConfig cfg;
    cfg.d_re = 8;
    cfg.d_hid = 16;
    cfg.n_experts = 2;
    cfg.top_k = 1;
    cfg.n_heads = 2;
    cfg.n_blocks = 1;
    cfg.adopt_geometry(tiny_sys());
    return cfg;
}

std::vector<DualBandSample> make_samples(const SystemConfig& sys, int n, uint64_t seed0) {
    std::vector<DualBandSample> v;
    for (int i = 0; i < n; ++i) v.push_back(generate_sample(sys, seed0 + i));
    return v;
}

// Mean routing fractions per expert over a dataset, averaged over MoE layers.
std::vector<double> mean_route_fractions(MdfceModel& m, const std::vector<DualBandSample>& data) {
    std::vector<double> p(m.cfg.n_experts, 0.0);
    long layers = 0;
    for (const auto& s : data) {
        ForwardTrace trace;
        mdfce_forward(s.h_sub6, m, &trace);
        for (const GateDecision& gd : trace.gates) {
            for (int j = 0; j < m.cfg.n_experts; ++j) p[j] += gd.route_fraction[j];
            ++layers;
        }
    }
    for (double& v : p) v /= static_cast<double>(layers);
    return p;
}

} // namespace

TEST(NmseLoss, ClosedForms) {
    const DualBandSample s = generate_sample(tiny_sys(), 3);
    EXPECT_DOUBLE_EQ(nmse_loss({s.h_mmwave}, {s.h_mmwave}), 0.0);

    ComplexMatrix zero(s.h_mmwave.rows, s.h_mmwave.cols);
    EXPECT_DOUBLE_EQ(nmse_loss({s.h_mmwave}, {zero}), 1.0);

    ComplexMatrix twice = s.h_mmwave;
    for (cplx& z : twice.v) z *= 2.0;
    EXPECT_NEAR(nmse_loss({s.h_mmwave}, {twice}), 1.0, 1e-12);

    EXPECT_THROW(nmse_loss({zero}, {s.h_mmwave}), ContractError);
}

TEST(NmseLoss, GraphAndComplexRoutesAgree) {
    const ModelConfig cfg = tiny_model_cfg();
    MdfceModel m = MdfceModel::init(cfg, tiny_sys(), 5);
    const DualBandSample s = generate_sample(tiny_sys(), 7);
    const ComplexMatrix est = mdfce_forward(s.h_sub6, m);
    const double via_complex = nmse_loss({s.h_mmwave}, {est});

    Graph g;
    g.recording = false;
    const Tensor pred = mdfce_forward_real(g, prepare_input(s.h_sub6, m), m);
    const Tensor target = csi_to_real(s.h_mmwave, cfg.mm_ue, cfg.mm_k);
    const double via_graph = nmse_loss_graph(g, pred, target).value();
    EXPECT_NEAR(via_complex, via_graph, 1e-12);
}

TEST(AuxLoss, BalancedCollapsedAndDegenerate) {
    // Balanced: m_j = 1/N_e, p_j = K/N_e.
    const int ne = 8, k = 2, T = 8;
    GateDecision balanced;
    balanced.mean_gate = Tensor::full({1, ne}, 1.0 / ne);
    balanced.route_fraction = Tensor::full({1, ne}, double(k) / ne);
    EXPECT_DOUBLE_EQ(aux_loss({balanced}), double(k));

    // Collapse: all tokens on the same K experts with uniform weights.
    GateDecision collapsed;
    collapsed.mean_gate = Tensor::zeros({1, ne});
    collapsed.route_fraction = Tensor::zeros({1, ne});
    for (int j = 0; j < k; ++j) {
        collapsed.mean_gate[j] = 1.0 / k;
        collapsed.route_fraction[j] = 1.0;
    }
    EXPECT_DOUBLE_EQ(aux_loss({collapsed}), double(ne));

    GateDecision single;
    single.mean_gate = Tensor::full({1, 1}, 1.0);
    single.route_fraction = Tensor::full({1, 1}, 1.0);
    EXPECT_DOUBLE_EQ(aux_loss({single}), 1.0);

    // Averaged across layers.
    EXPECT_DOUBLE_EQ(aux_loss({balanced, collapsed}), (k + ne) / 2.0);
    (void)T;
}

TEST(AuxLoss, LowerBoundOverRandomDecisions) {
    // 1e4 random routings through the real gate; never below K - 1e-9.
    ModelConfig cfg = tiny_model_cfg();
    cfg.n_experts = 8;
    cfg.d_hid = 32;
    cfg.top_k = 2;
    MoeParams moe;
    Rng rng(11);
    moe.init(cfg, rng);
    double min_seen = 1e300;
    for (int trial = 0; trial < 10000; ++trial) {
        Tensor gate_in = Tensor::zeros({8, cfg.d_re});
        for (size_t i = 0; i < gate_in.numel(); ++i) gate_in[i] = 2.0 * rng.normal();
        Graph g;
        Tensor x = Tensor::zeros({8, cfg.d_re});
        auto [out, gd] = moe_forward(g, x, gate_in, moe, cfg);
        min_seen = std::min(min_seen, aux_loss({gd}));
    }
    EXPECT_GE(min_seen, cfg.top_k - 1e-9);
}

TEST(TotalLoss, MixAndAffinity) {
    EXPECT_DOUBLE_EQ(total_loss(0.7, 3.0, 1.0), 0.7);
    EXPECT_DOUBLE_EQ(total_loss(0.7, 3.0, 0.0), 3.0);
    EXPECT_NEAR(total_loss(0.5, 2.0, 0.99), 0.515, 1e-15);
    EXPECT_THROW(total_loss(1.0, 1.0, 1.5), ContractError);

    // Affine in both arguments for fixed kappa.
    const double kappa = 0.37;
    Rng rng(13);
    for (int i = 0; i < 50; ++i) {
        const double a = rng.normal(), b = rng.normal(), c = rng.normal(), d = rng.normal();
        const double alpha = rng.uniform();
        EXPECT_NEAR(total_loss(alpha * a + (1 - alpha) * c, alpha * b + (1 - alpha) * d, kappa),
                    alpha * total_loss(a, b, kappa) + (1 - alpha) * total_loss(c, d, kappa), 1e-12);
    }
}

TEST(NmseDb, ClosedFormsAndGuards) {
    EXPECT_DOUBLE_EQ(nmse_db(1.0), 0.0);
    EXPECT_NEAR(nmse_db(0.1), -10.0, 1e-12);
    EXPECT_NEAR(nmse_db(0.01), -20.0, 1e-12);
    EXPECT_TRUE(std::isinf(nmse_db(0.0)));
    EXPECT_LT(nmse_db(0.0), 0.0);
    EXPECT_THROW(nmse_db(-0.5), ContractError);
    EXPECT_DOUBLE_EQ(nmse_db_floored(0.0), kNmseDbFloor);
}

TEST(AdamWOpt, DecoupledDecayWithZeroGradient) {
    AdamW::Hyper hyper;
    hyper.weight_decay = 0.1;
    AdamW opt(hyper);
    std::vector<Tensor> params{Tensor::from({2}, {2.0, -3.0}, true)};
    const double lr = 0.05;
    opt.step(params, lr); // no grads populated: pure decay
    EXPECT_DOUBLE_EQ(params[0][0], 2.0 * (1.0 - lr * hyper.weight_decay));
    EXPECT_DOUBLE_EQ(params[0][1], -3.0 * (1.0 - lr * hyper.weight_decay));
}

TEST(AdamWOpt, SingleStepHandComputed) {
    AdamW::Hyper hyper;
    hyper.weight_decay = 0.0;
    AdamW opt(hyper);
    std::vector<Tensor> params{Tensor::scalar(1.0, true)};
    params[0].ensure_grad()[0] = 1.0;
    opt.step(params, 0.1);
    // Bias-corrected mhat = 1, vhat = 1: theta = 1 - 0.1 * 1/(1 + eps).
    EXPECT_NEAR(params[0][0], 0.9, 1e-8);
}

TEST(AdamWOpt, GroupsUpdateIndependently) {
    AdamW opt;
    std::vector<Tensor> params{Tensor::scalar(1.0, true), Tensor::scalar(1.0, true)};
    params[0].ensure_grad()[0] = 1.0; // group 1 gets no gradient
    const double before = params[1][0];
    opt.step(params, 0.1);
    EXPECT_NE(params[0][0], 1.0);
    // Group 1 changed only by decay, untouched by group 0's moments.
    EXPECT_DOUBLE_EQ(params[1][0], before * (1.0 - 0.1 * opt.hyper().weight_decay));
}

TEST(LrSchedule, LinearWarmupThenConstant) {
    const double target = 1e-3;
    const long total = 1000;
    EXPECT_NEAR(lr_schedule(target, 0.1, 0, total), target / 100.0, 1e-15);
    EXPECT_NEAR(lr_schedule(target, 0.1, 49, total), target * 0.5, 1e-15);
    EXPECT_DOUBLE_EQ(lr_schedule(target, 0.1, 100, total), target);
    EXPECT_DOUBLE_EQ(lr_schedule(target, 0.1, 999, total), target);
    EXPECT_DOUBLE_EQ(lr_schedule(target, 0.0, 0, total), target);
}

TEST(NormStatsCompute, MatchesManual) {
    const SystemConfig sys = tiny_sys();
    ModelConfig cfg = tiny_model_cfg();
    const auto samples = make_samples(sys, 10, 100);
    const NormStats ns = compute_norm_stats(samples, cfg);
    ASSERT_EQ(ns.input_mean.size(), static_cast<size_t>(cfg.feat_in()));

    // Manual check of feature 0 of the input stats.
    double mean = 0.0, sq = 0.0;
    long n = 0;
    for (const auto& s : samples) {
        const Tensor x = csi_to_real(s.h_sub6, cfg.sub6_ue, cfg.sub6_k);
        for (int t = 0; t < x.rows(); ++t) {
            mean += x.at(t, 0);
            sq += x.at(t, 0) * x.at(t, 0);
            ++n;
        }
    }
    mean /= n;
    const double stddev = std::sqrt(sq / n - mean * mean);
    EXPECT_NEAR(ns.input_mean[0], mean, 1e-12);
    EXPECT_NEAR(ns.input_std[0], stddev, 1e-12);
}

TEST(Train, OverfitsSmallSetByTwentyDb) {
    const SystemConfig sys = tiny_sys();
    ModelConfig mcfg = tiny_model_cfg();
    const auto samples = make_samples(sys, 16, 500);

    MdfceModel model = MdfceModel::init(mcfg, sys, 7);
    model.norm = compute_norm_stats(samples, mcfg);

    TrainConfig tcfg;
    tcfg.target_lr = 3e-3;
    tcfg.epochs = 200;
    tcfg.batch_size = 4;
    tcfg.seed = 1;
    const TrainResult result = train(model, samples, tcfg);
    ASSERT_FALSE(result.diverged);
    ASSERT_EQ(result.history.size(), 200u);
    const double first_db = nmse_db(result.history.front().nmse_loss);
    const double last_db = nmse_db(result.history.back().nmse_loss);
    EXPECT_LE(last_db, first_db - 20.0) << "first " << first_db << " dB, last " << last_db << " dB";
}

TEST(Train, DeterministicHistoryAndThreadedReproducibility) {
    const SystemConfig sys = tiny_sys();
    ModelConfig mcfg = tiny_model_cfg();
    const auto samples = make_samples(sys, 8, 900);

    auto run = [&](int threads) {
        MdfceModel model = MdfceModel::init(mcfg, sys, 3);
        model.norm = compute_norm_stats(samples, mcfg);
        TrainConfig tcfg;
        tcfg.target_lr = 1e-3;
        tcfg.epochs = 5;
        tcfg.batch_size = 8;
        tcfg.seed = 11;
        tcfg.threads = threads;
        return train(model, samples, tcfg).history;
    };
    const auto h1 = run(1);
    const auto h2 = run(1);
    ASSERT_EQ(h1.size(), h2.size());
    for (size_t i = 0; i < h1.size(); ++i) {
        EXPECT_EQ(h1[i].total_loss, h2[i].total_loss);
        EXPECT_EQ(h1[i].nmse_loss, h2[i].nmse_loss);
        EXPECT_EQ(h1[i].aux_loss, h2[i].aux_loss);
    }
    const auto t1 = run(2);
    const auto t2 = run(2);
    for (size_t i = 0; i < t1.size(); ++i) EXPECT_EQ(t1[i].total_loss, t2[i].total_loss);
}

TEST(Train, NoisyInputsChangeTrajectoryDeterministically) {
    const SystemConfig sys = tiny_sys();
    ModelConfig mcfg = tiny_model_cfg();
    const auto samples = make_samples(sys, 8, 1300);
    auto run = [&](double snr) {
        MdfceModel model = MdfceModel::init(mcfg, sys, 3);
        model.norm = compute_norm_stats(samples, mcfg);
        TrainConfig tcfg;
        tcfg.target_lr = 1e-3;
        tcfg.epochs = 3;
        tcfg.batch_size = 8;
        tcfg.seed = 11;
        tcfg.snr_db_train = snr;
        return train(model, samples, tcfg).history;
    };
    const auto clean = run(std::numeric_limits<double>::infinity());
    const auto noisy1 = run(10.0);
    const auto noisy2 = run(10.0);
    // Epoch 1 output is input-independent (zero-started head), so compare the end.
    EXPECT_NE(clean.back().nmse_loss, noisy1.back().nmse_loss);
    for (size_t i = 0; i < noisy1.size(); ++i) EXPECT_EQ(noisy1[i].nmse_loss, noisy2[i].nmse_loss);
}

TEST(Train, BalanceLossSpreadsRoutingOnSkewedStart) {
    // top_k = 1 would be gradient-dead: the masked softmax over one kept
    // logit is constantly 1, so the aux loss needs K >= 2 to act.
    const SystemConfig sys = tiny_sys();
    ModelConfig mcfg = tiny_model_cfg();
    mcfg.n_experts = 4;
    mcfg.d_hid = 32;
    mcfg.top_k = 2;
    const auto samples = make_samples(sys, 16, 2100);

    double collapse_no_balance = 0.0, collapse_balanced = 0.0;
    for (uint64_t seed = 0; seed < 5; ++seed) {
        auto run = [&](double kappa) {
            MdfceModel model = MdfceModel::init(mcfg, sys, 31 + seed);
            model.norm = compute_norm_stats(samples, mcfg);
            // Skewed start: every gate strongly prefers expert 0.
            model.mdfm.moe.gate_b[0] = 4.0;
            for (auto& b : model.dfim) b.moe.gate_b[0] = 4.0;
            TrainConfig tcfg;
            tcfg.target_lr = 2e-3;
            tcfg.epochs = 40;
            tcfg.batch_size = 8;
            tcfg.seed = 77 + seed;
            tcfg.kappa = kappa;
            train(model, samples, tcfg);
            const auto p = mean_route_fractions(model, samples);
            return *std::max_element(p.begin(), p.end());
        };
        collapse_no_balance += run(1.0);
        collapse_balanced += run(0.99);
    }
    EXPECT_GT(collapse_no_balance, collapse_balanced);
}

TEST(Train, RouteFractionsApproachBalanceUnderAuxLoss) {
    const SystemConfig sys = tiny_sys();
    ModelConfig mcfg = tiny_model_cfg();
    mcfg.n_experts = 4;
    mcfg.d_hid = 32;
    mcfg.top_k = 2;
    const auto samples = make_samples(sys, 32, 3000);

    MdfceModel model = MdfceModel::init(mcfg, sys, 9);
    model.norm = compute_norm_stats(samples, mcfg);
    TrainConfig tcfg;
    tcfg.target_lr = 2e-3;
    tcfg.epochs = 60;
    tcfg.batch_size = 8;
    tcfg.seed = 5;
    tcfg.kappa = 0.99;
    train(model, samples, tcfg);

    const auto p = mean_route_fractions(model, samples);
    const double expected = double(mcfg.top_k) / mcfg.n_experts;
    for (int j = 0; j < mcfg.n_experts; ++j)
        EXPECT_NEAR(p[j], expected, 0.2) << "expert " << j;
}

TEST(Train, DivergenceRollsBackToLastGoodParameters) {
    const SystemConfig sys = tiny_sys();
    ModelConfig mcfg = tiny_model_cfg();
    const auto samples = make_samples(sys, 4, 4000);
    MdfceModel model = MdfceModel::init(mcfg, sys, 13);
    model.norm = compute_norm_stats(samples, mcfg);
    // Poison the output head so the first epoch's loss overflows to inf.
    model.out.feature_map[0] = 1e308;
    const std::vector<double> entry_values = model.out.feature_map.values();

    TrainConfig tcfg;
    tcfg.epochs = 3;
    tcfg.batch_size = 4;
    const TrainResult result = train(model, samples, tcfg);
    EXPECT_TRUE(result.diverged);
    EXPECT_TRUE(result.history.empty());
    EXPECT_EQ(model.out.feature_map.values(), entry_values); // rolled back, not NaN
}

TEST(Train, NanMidForwardAlsoRollsBack) {
    // A NaN that reaches a softmax surfaces as an exception inside a worker;
    // the loop must convert it into a clean divergence instead of dying.
    const SystemConfig sys = tiny_sys();
    ModelConfig mcfg = tiny_model_cfg();
    const auto samples = make_samples(sys, 4, 4400);
    MdfceModel model = MdfceModel::init(mcfg, sys, 13);
    model.norm = compute_norm_stats(samples, mcfg);
    model.mdfm.attn.wq[0] = 1e308;
    const std::vector<double> entry_values = model.mdfm.attn.wq.values();

    TrainConfig tcfg;
    tcfg.epochs = 3;
    tcfg.batch_size = 2;
    tcfg.threads = 2;
    const TrainResult result = train(model, samples, tcfg);
    EXPECT_TRUE(result.diverged);
    EXPECT_FALSE(result.divergence_reason.empty());
    EXPECT_EQ(model.mdfm.attn.wq.values(), entry_values);
}

TEST(HistoryCsv, FormatMatchesContract) {
    std::vector<EpochStats> h(2);
    h[0] = {1, 0.5, 0.4, 1.5, 1e-4};
    h[1] = {2, 0.25, 0.2, 1.2, 1e-4};
    const std::string csv = history_csv(h);
    EXPECT_EQ(csv.rfind("epoch,total_loss,nmse_loss,aux_loss,lr\n", 0), 0u);
    EXPECT_NE(csv.find("\n1,0.5,0.4,1.5,0.0001\n"), std::string::npos);
}

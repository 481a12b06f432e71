// SPDX-License-Identifier: Apache-2.0
//
// mdfce: dual-band massive MIMO channel extrapolation toolkit
//
// Minibatch AdamW training of the extrapolator. Within a batch, samples are
// split into contiguous ranges, one worker thread per range, each with its
// own parameter replica; worker gradients are merged in worker order, so a
// run is bit-reproducible for a fixed (seed, thread count). threads = 1 is
// the fully serialized reduction used by deterministic mode.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "mdfce/channel.hpp"
#include "mdfce/losses.hpp"
#include "mdfce/model.hpp"
#include "mdfce/optimizer.hpp"

namespace mdfce {

struct TrainConfig {
    double target_lr = 1e-4;
    int epochs = 1000;
    int batch_size = 128;
    double kappa = 0.99;
    double warmup_fraction = 0.05;
    uint64_t seed = 0;
    double snr_db_train = std::numeric_limits<double>::infinity();
    int threads = 1;
    AdamW::Hyper adamw{};

    void validate() const {
        if (!(target_lr > 0.0)) throw ContractError("TrainConfig: target_lr must be > 0");
        if (epochs < 1 || batch_size < 1) throw ContractError("TrainConfig: epochs/batch_size >= 1");
        if (!(kappa >= 0.0 && kappa <= 1.0)) throw ContractError("TrainConfig: kappa in [0,1]");
        if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0))
            throw ContractError("TrainConfig: warmup_fraction in [0,1]");
        if (threads < 1) throw ContractError("TrainConfig: threads >= 1");
    }
};

struct EpochStats {
    int epoch = 0;
    double total_loss = 0.0;
    double nmse_loss = 0.0;
    double aux_loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    bool diverged = false;
    std::string divergence_reason;
};

// Per-feature mean/std over (samples x tokens), frozen for the model's life.
inline NormStats compute_norm_stats(const std::vector<DualBandSample>& samples,
                                    const ModelConfig& cfg) {
    if (samples.empty()) throw ContractError("compute_norm_stats: empty training split");
    NormStats ns;
    ns.input_mean.assign(cfg.feat_in(), 0.0);
    ns.input_std.assign(cfg.feat_in(), 0.0);
    ns.target_mean.assign(cfg.feat_out(), 0.0);
    ns.target_std.assign(cfg.feat_out(), 0.0);

    auto accumulate = [](const Tensor& x, std::vector<double>& mean, std::vector<double>& sq) {
        for (int i = 0; i < x.rows(); ++i)
            for (int j = 0; j < x.cols(); ++j) {
                mean[j] += x.at(i, j);
                sq[j] += x.at(i, j) * x.at(i, j);
            }
    };
    std::vector<double> in_sq(cfg.feat_in(), 0.0), tg_sq(cfg.feat_out(), 0.0);
    for (const DualBandSample& s : samples) {
        accumulate(csi_to_real(s.h_sub6, cfg.sub6_ue, cfg.sub6_k), ns.input_mean, in_sq);
        accumulate(csi_to_real(s.h_mmwave, cfg.mm_ue, cfg.mm_k), ns.target_mean, tg_sq);
    }
    const double n_in = static_cast<double>(samples.size()) * cfg.tokens_in();
    const double n_tg = static_cast<double>(samples.size()) * cfg.tokens_out();
    for (int j = 0; j < cfg.feat_in(); ++j) {
        ns.input_mean[j] /= n_in;
        const double var = in_sq[j] / n_in - ns.input_mean[j] * ns.input_mean[j];
        ns.input_std[j] = std::max(1e-8, std::sqrt(std::max(0.0, var)));
    }
    for (int j = 0; j < cfg.feat_out(); ++j) {
        ns.target_mean[j] /= n_tg;
        const double var = tg_sq[j] / n_tg - ns.target_mean[j] * ns.target_mean[j];
        ns.target_std[j] = std::max(1e-8, std::sqrt(std::max(0.0, var)));
    }
    return ns;
}

namespace detail {

struct SampleLoss {
    double nmse = 0.0;
    double aux = 0.0;
};

// Forward + backward for one sample; gradients land in the given model's
// parameter grad buffers, scaled by inv_batch.
inline SampleLoss train_sample_pass(const MdfceModel& model, const ModelInput& input,
                                    const Tensor& target_real, double kappa, double inv_batch) {
    Graph g;
    ForwardTrace trace;
    Tensor pred = mdfce_forward_real(g, input, model, &trace);
    Tensor nmse = nmse_loss_graph(g, pred, target_real);
    Tensor aux = aux_loss_graph(g, trace.gates);
    Tensor loss = scale(g, total_loss_graph(g, nmse, aux, kappa), inv_batch);
    g.backward(loss);
    return {nmse.value(), aux.value()};
}

inline void fisher_yates(std::vector<int>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[rng.below(i)]);
}

} // namespace detail

// Minimizes kappa * L_NMSE + (1-kappa) * L_aux with AdamW and linear warmup.
// When snr_db_train is finite, the sub-6 inputs are re-corrupted with fresh
// AWGN every epoch. On divergence (non-finite epoch loss) the parameters are
// rolled back to the end of the last finite epoch and training stops.
inline TrainResult train(MdfceModel& model, const std::vector<DualBandSample>& samples,
                         const TrainConfig& cfg,
                         const std::function<void(const EpochStats&)>& on_epoch = nullptr) {
    cfg.validate();
    if (samples.empty()) throw ContractError("train: empty dataset");
    const int n = static_cast<int>(samples.size());
    const bool noisy = std::isfinite(cfg.snr_db_train);

    // Frozen targets and (when noiseless) frozen inputs.
    std::vector<Tensor> targets(n);
    std::vector<ModelInput> inputs(n);
    for (int i = 0; i < n; ++i) {
        targets[i] = csi_to_real(samples[i].h_mmwave, model.cfg.mm_ue, model.cfg.mm_k);
        if (!noisy) inputs[i] = prepare_input(samples[i].h_sub6, model);
    }

    const int steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const long total_steps = static_cast<long>(steps_per_epoch) * cfg.epochs;
    const int n_workers = std::max(1, std::min(cfg.threads, cfg.batch_size));

    auto master_params = model.parameters();
    std::vector<Tensor> param_tensors;
    param_tensors.reserve(master_params.size());
    for (auto& p : master_params) param_tensors.push_back(p.tensor);

    std::vector<MdfceModel> replicas;
    for (int w = 1; w < n_workers; ++w) replicas.push_back(model.clone());

    AdamW opt(cfg.adamw);
    TrainResult result;
    std::vector<double> snapshot, last_good;
    auto save_params = [&](std::vector<double>& dst) {
        dst.clear();
        for (const Tensor& t : param_tensors) dst.insert(dst.end(), t.values().begin(), t.values().end());
    };
    auto restore_params = [&](const std::vector<double>& src) {
        size_t off = 0;
        for (Tensor& t : param_tensors) {
            std::copy(src.begin() + off, src.begin() + off + t.numel(), t.values().begin());
            off += t.numel();
        }
    };
    save_params(last_good);

    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(cfg.seed, 0x73687566 /* "shuf" */));
    long step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (noisy) {
            for (int i = 0; i < n; ++i) {
                const ComplexMatrix corrupted = apply_awgn(
                    samples[i].h_sub6, cfg.snr_db_train,
                    derive_seed(cfg.seed, 0x6e6f6973 /* "nois" */ + static_cast<uint64_t>(epoch), i));
                inputs[i] = prepare_input(corrupted, model);
            }
        }
        detail::fisher_yates(order, shuffle_rng);

        double epoch_nmse = 0.0, epoch_aux = 0.0, epoch_total = 0.0, lr_sum = 0.0;
        bool blew_up = false;
        std::string blow_up_reason;
        for (int b0 = 0; b0 < n && !blew_up; b0 += cfg.batch_size) {
            const int bsz = std::min(cfg.batch_size, n - b0);
            const double inv_batch = 1.0 / bsz;
            model.zero_grads();
            for (auto& r : replicas) r.zero_grads();

            std::vector<detail::SampleLoss> losses(bsz);
            std::mutex error_mutex;
            // A numerical blow-up (NaN propagating into a softmax) surfaces
            // as an exception; record it instead of letting a worker terminate.
            auto run_range = [&](MdfceModel& worker_model, int lo, int hi) {
                try {
                    for (int i = lo; i < hi; ++i) {
                        const int s = order[b0 + i];
                        losses[i] = detail::train_sample_pass(worker_model, inputs[s], targets[s],
                                                              cfg.kappa, inv_batch);
                    }
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    blew_up = true;
                    if (blow_up_reason.empty()) blow_up_reason = e.what();
                }
            };
            if (n_workers == 1 || bsz == 1) {
                run_range(model, 0, bsz);
            } else {
                std::vector<std::thread> pool;
                const int chunk = (bsz + n_workers - 1) / n_workers;
                for (int w = 0; w < n_workers; ++w) {
                    const int lo = w * chunk, hi = std::min(bsz, lo + chunk);
                    if (lo >= hi) break;
                    MdfceModel& wm = (w == 0) ? model : replicas[w - 1];
                    pool.emplace_back(run_range, std::ref(wm), lo, hi);
                }
                for (auto& t : pool) t.join();
                // Merge replica gradients into the master, in worker order.
                for (auto& r : replicas) {
                    auto rp = r.parameters();
                    for (size_t pi = 0; pi < param_tensors.size(); ++pi) {
                        if (!rp[pi].tensor.has_grad()) continue;
                        auto& dst = param_tensors[pi].ensure_grad();
                        const auto& src = rp[pi].tensor.grad();
                        for (size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
                    }
                }
            }

            if (blew_up) break;
            const double lr = lr_schedule(cfg.target_lr, cfg.warmup_fraction, step, total_steps);
            opt.step(param_tensors, lr);
            for (auto& r : replicas) r.copy_values_from(model);
            ++step;
            lr_sum += lr;

            for (const auto& l : losses) {
                epoch_nmse += l.nmse;
                epoch_aux += l.aux;
                epoch_total += total_loss(l.nmse, l.aux, cfg.kappa);
            }
        }
        if (blew_up) {
            restore_params(last_good);
            result.diverged = true;
            result.divergence_reason = blow_up_reason;
            break;
        }

        EpochStats es;
        es.epoch = epoch + 1;
        es.nmse_loss = epoch_nmse / n;
        es.aux_loss = epoch_aux / n;
        es.total_loss = epoch_total / n;
        es.lr = lr_sum / steps_per_epoch;

        if (!std::isfinite(es.total_loss)) {
            restore_params(last_good);
            result.diverged = true;
            result.divergence_reason = "non-finite epoch loss";
            break;
        }
        save_params(last_good);
        result.history.push_back(es);
        if (on_epoch) on_epoch(es);
    }
    return result;
}

} // namespace mdfce

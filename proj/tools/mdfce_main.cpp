// SPDX-License-Identifier: Apache-2.0
//
// mdfce command-line front end: dataset generation, training, evaluation.
//
// Exit codes: 0 success, 2 usage error, 1 runtime error.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mdfce/checkpoint.hpp"
#include "mdfce/dataset_io.hpp"
#include "mdfce/eval.hpp"
#include "mdfce/run_config.hpp"
#include "mdfce/train.hpp"

namespace fs = std::filesystem;
using namespace mdfce;

namespace {

struct CommonOpts {
    std::string config_path;
    uint64_t seed = 0;
    bool seed_set = false;
    std::string out;
    int threads = 0;
    bool deterministic = false;
};

RunConfig load_config(const CommonOpts& opts) {
    RunConfig cfg = load_run_config(opts.config_path);
    if (opts.seed_set) cfg.seed = opts.seed;
    if (!opts.out.empty()) cfg.out_dir = opts.out;
    if (opts.threads > 0) cfg.threads = opts.threads;
    if (opts.deterministic) cfg.deterministic = true;
    cfg.finalize();
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool need_out) {
    cmd->add_option("--config", opts.config_path, "run configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", opts.seed, "seed override")->each([&](const std::string&) {
        opts.seed_set = true;
    });
    auto* out = cmd->add_option("--out", opts.out, "output path");
    if (need_out) out->required();
    cmd->add_option("--threads", opts.threads, "worker thread cap")->check(CLI::PositiveNumber);
    cmd->add_flag("--deterministic", opts.deterministic,
                  "fully serialized reductions (forces a single worker)");
}

int cmd_generate(const CommonOpts& opts, long long count) {
    const RunConfig cfg = load_config(opts);
    if (count < 1) {
        std::fprintf(stderr, "generate: --count must be >= 1\n");
        return 2;
    }
    std::vector<DualBandSample> samples;
    samples.reserve(static_cast<size_t>(count));
    for (long long i = 0; i < count; ++i)
        samples.push_back(generate_sample(cfg.system, cfg.seed + static_cast<uint64_t>(i)));
    write_dataset(cfg.system, samples, opts.out);

    const auto& s = samples.front();
    std::printf("wrote %lld samples to %s\n", count, opts.out.c_str());
    std::printf("  sub-6:  %d x %d (%d BS x %d UE x %d subcarriers)\n", s.h_sub6.rows,
                s.h_sub6.cols, cfg.system.sub6.bs_antennas, cfg.system.sub6.ue_antennas,
                cfg.system.sub6.subcarriers);
    std::printf("  mmWave: %d x %d (%d BS x %d UE x %d subcarriers)\n", s.h_mmwave.rows,
                s.h_mmwave.cols, cfg.system.mmwave.bs_antennas, cfg.system.mmwave.ue_antennas,
                cfg.system.mmwave.subcarriers);
    std::printf("  file size: %ju bytes\n", static_cast<uintmax_t>(fs::file_size(opts.out)));
    return 0;
}

int cmd_train(const CommonOpts& opts, bool no_tfem) {
    const RunConfig cfg = load_config(opts);
    if (cfg.train_dataset.empty()) {
        std::fprintf(stderr, "train: config has no train_dataset\n");
        return 2;
    }
    const Dataset ds = read_dataset(cfg.train_dataset);
    if (!(ds.config == cfg.system))
        throw ContractError("train: dataset system config does not match run config:\n--- dataset\n" +
                            system_config_to_text(ds.config) + "--- config\n" +
                            system_config_to_text(cfg.system));

    fs::create_directories(cfg.out_dir);
    MdfceModel model = MdfceModel::init(cfg.model, cfg.system, cfg.seed);
    model.no_tfem = no_tfem;
    model.norm = compute_norm_stats(ds.samples, cfg.model);

    const std::string ckpt_path = cfg.out_dir + "/model.ckpt";
    const std::string history_path = cfg.out_dir + "/history.csv";
    std::printf("training %s on %zu samples, %d epochs\n", no_tfem ? "mdfce (no-tfem)" : "mdfce",
                ds.samples.size(), cfg.train.epochs);

    const TrainResult result =
        train(model, ds.samples, cfg.train, [&](const EpochStats& e) {
            if (e.epoch == 1 || e.epoch % 10 == 0 || e.epoch == cfg.train.epochs) {
                std::printf("  epoch %4d  total %.6g  nmse %.6g (%.2f dB)  aux %.6g  lr %.3g\n",
                            e.epoch, e.total_loss, e.nmse_loss, nmse_db_floored(e.nmse_loss),
                            e.aux_loss, e.lr);
                std::fflush(stdout);
            }
            // Checkpoints are written atomically; an interrupted run keeps the last one.
            save_checkpoint(model, ckpt_path);
        });
    write_text_file(history_path, history_csv(result.history));

    if (result.diverged) {
        std::fprintf(stderr, "training diverged (%s); last good checkpoint kept at %s\n",
                     result.divergence_reason.c_str(), ckpt_path.c_str());
        return 1;
    }
    save_checkpoint(model, ckpt_path);
    std::printf("checkpoint: %s\nhistory:    %s\n", ckpt_path.c_str(), history_path.c_str());
    return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& checkpoint_path,
             const std::string& snr_csv, const std::vector<std::string>& pd_args) {
    const RunConfig cfg = load_config(opts);
    std::vector<double> snr_list;
    {
        std::istringstream is(snr_csv);
        std::string item;
        while (std::getline(is, item, ','))
            if (!item.empty()) snr_list.push_back(item == "inf" ? INFINITY : std::stod(item));
    }
    if (snr_list.empty()) {
        std::fprintf(stderr, "eval: --snr list is empty\n");
        return 2;
    }
    if (cfg.val_dataset.empty()) {
        std::fprintf(stderr, "eval: config has no val_dataset\n");
        return 2;
    }
    std::vector<Rational> pds = cfg.pd_mmwave;
    for (const std::string& p : pd_args) pds.push_back(Rational::parse(p));
    if (checkpoint_path.empty() && pds.empty()) {
        std::fprintf(stderr, "eval: nothing to evaluate (no checkpoint, no --pd baselines)\n");
        return 2;
    }
    const Dataset ds = read_dataset(cfg.val_dataset);

    std::vector<Method> methods;
    MdfceModel model; // must outlive evaluate()
    if (!checkpoint_path.empty()) {
        model = load_checkpoint(checkpoint_path);
        if (!(model.sys == cfg.system))
            throw ContractError("eval: checkpoint system config does not match run config:\n--- checkpoint\n" +
                                system_config_to_text(model.sys) + "--- config\n" +
                                system_config_to_text(cfg.system));
        methods.push_back(make_mdfce_method(model, cfg.pd_sub6));
    }
    for (const Rational& pd : pds) {
        PilotConfig pc;
        pc.band = Band::mmwave;
        pc.density = pd;
        methods.push_back(make_ls_method(cfg.system, pc));
    }
    if (methods.empty()) {
        std::fprintf(stderr, "eval: nothing to evaluate (no checkpoint, no --pd baselines)\n");
        return 2;
    }

    const EvalReport report = evaluate(methods, ds.samples, snr_list, cfg.seed + 1);
    fs::create_directories(cfg.out_dir);
    const std::string csv_path = cfg.out_dir + "/eval.csv";
    write_text_file(csv_path, eval_report_csv(report));
    std::printf("%s", eval_report_table(report).c_str());
    std::printf("report: %s\n", csv_path.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mdfce: dual-band CSI extrapolation toolkit"};
    app.require_subcommand(1);

    CommonOpts gen_opts, train_opts, eval_opts;
    long long count = 0;
    bool no_tfem = false;
    std::string checkpoint_path, snr_csv;
    std::vector<std::string> pd_args;

    auto* gen = app.add_subcommand("generate", "generate a dual-band dataset file");
    add_common(gen, gen_opts, true);
    gen->add_option("--count", count, "number of samples")->required();

    auto* tr = app.add_subcommand("train", "train the extrapolator");
    add_common(tr, train_opts, false);
    tr->add_flag("--no-tfem", no_tfem, "ablation: self-gated MDFM instead of the TFEM latent");

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint and/or LS baselines");
    add_common(ev, eval_opts, false);
    ev->add_option("--checkpoint", checkpoint_path, "model checkpoint")->check(CLI::ExistingFile);
    ev->add_option("--snr", snr_csv, "comma-separated SNR list in dB (e.g. 0,5,10,inf)")->required();
    ev->add_option("--pd", pd_args, "mmWave pilot density for the LS baseline (e.g. 1/4)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2; // usage problems are exit code 2
    }

    try {
        if (gen->parsed()) return cmd_generate(gen_opts, count);
        if (tr->parsed()) return cmd_train(train_opts, no_tfem);
        if (ev->parsed()) return cmd_eval(eval_opts, checkpoint_path, snr_csv, pd_args);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}

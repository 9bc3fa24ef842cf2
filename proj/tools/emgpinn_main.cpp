// Batch CLI for the EMG-to-kinematics pipeline: synthetic dataset
// generation, PINN/ANN training, evaluation, inverse dynamics on trial
// files, and gradient checking. All outputs are files; the resolved config
// snapshot is written beside them.
//
// Exit codes: 0 success, 2 config/schema error, 3 runtime numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "emgpinn/checkpoint.hpp"
#include "emgpinn/config.hpp"
#include "emgpinn/data.hpp"
#include "emgpinn/eval.hpp"
#include "emgpinn/gradcheck.hpp"
#include "emgpinn/training.hpp"

namespace fs = std::filesystem;
using namespace emgpinn;

namespace {

Config load_or_default(const std::string& path) {
    return path.empty() ? default_config() : load_config(path);
}

void write_resolved(const Config& cfg, const fs::path& dir) {
    fs::create_directories(dir);
    std::ofstream f(dir / "resolved_config.json");
    f << cfg.resolved.dump(2) << "\n";
}

void write_history_csv(const TrainResult& res, const TrainConfig& tc, const fs::path& path) {
    std::ofstream f(path);
    f << "# time_derivative=" << res.time_derivative << " stencil_h=" << tc.stencil_h << "\n";
    f << "epoch,load,lr,L_q,L_tau,alpha,J,val_J\n";
    char buf[256];
    for (const EpochRecord& r : res.history) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      r.epoch, r.load_kg, r.lr, r.L_q, r.L_tau, r.alpha, r.J, r.val_J);
        f << buf;
    }
}

int cmd_synth(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed) {
    Config cfg = load_or_default(config_path);
    if (seed) {
        cfg.synth.seed = *seed;
        cfg.resolved["data"]["synth"]["seed"] = *seed;
    }
    RunSet set = make_synthetic_dataset(cfg.model, cfg.synth);
    save_dataset(out_dir, set, cfg.synth.seed);
    write_resolved(cfg, out_dir);
    std::cout << "wrote " << set.runs.size() << " runs to " << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& dataset_dir,
              const std::string& mode_str, const std::string& out_dir,
              std::optional<std::uint64_t> seed) {
    Config cfg = load_or_default(config_path);
    if (seed) {
        cfg.training.seed = *seed;
        cfg.resolved["training"]["seed"] = *seed;
    }
    TrainMode mode = mode_str == "ann" ? TrainMode::Ann : TrainMode::Pinn;

    RunSet set = load_trials(dataset_dir);
    DatasetSplit ds = split(set, cfg.split_spec, cfg.split_seed);
    NormSpec norm = make_norm_spec(ds.train, cfg.reference_load);

    TrainResult res = train(ds, cfg.model, cfg.training, mode, cfg.arch, &norm);

    fs::create_directories(out_dir);
    Checkpoint ckpt{res.best_params, norm, config_hash(cfg), to_string(mode)};
    save_checkpoint(fs::path(out_dir) / "checkpoint.json", ckpt);
    Checkpoint final_ckpt{res.final_params, norm, config_hash(cfg), to_string(mode)};
    save_checkpoint(fs::path(out_dir) / "checkpoint_final.json", final_ckpt);
    write_history_csv(res, cfg.training, fs::path(out_dir) / "training_log.csv");
    write_resolved(cfg, out_dir);
    std::cout << "trained " << to_string(mode) << ": " << res.history.size()
              << " epochs, best val loss " << res.best_val << "\n";
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint_path,
             const std::string& dataset_dir, const std::string& out_dir) {
    Config cfg = load_or_default(config_path);
    if (!fs::exists(checkpoint_path))
        throw ConfigError("checkpoint not found: " + checkpoint_path);
    Checkpoint ckpt = load_checkpoint(checkpoint_path);

    RunSet set = load_trials(dataset_dir);
    DatasetSplit ds = split(set, cfg.split_spec, cfg.split_seed);

    EvalReport report = evaluate(ckpt.params, ds.test, ckpt.norm, ckpt.mode);
    fs::create_directories(out_dir);
    write_report_csv(report, fs::path(out_dir) / "report.csv");
    std::ofstream jf(fs::path(out_dir) / "report.json");
    jf << report_to_json(report).dump(2) << "\n";

    fs::path traces = fs::path(out_dir) / "traces";
    fs::create_directories(traces);
    for (const Run& run : ds.test.runs)
        for (std::size_t k = 0; k < run.trials.size(); ++k) {
            const std::string name = run_dir_name(run.load_kg, run.index) + "_trial_" +
                                     std::to_string(k) + ".csv";
            export_traces(ckpt.params, run.trials[k], ckpt.norm, traces / name);
        }
    write_resolved(cfg, out_dir);
    std::cout << "evaluated " << report.rows.size() << " (joint,trial) pairs\n";
    return 0;
}

int cmd_invdyn(const std::string& config_path, const std::string& trial_csv,
               const std::string& out_csv, double load_kg, double rate) {
    Config cfg = load_or_default(config_path);
    Trial trial = load_trial_csv(trial_csv, load_kg, rate);
    Trial out = benchmark_torque(trial, cfg.model, cfg.smooth);
    save_trial_csv(out_csv, out);
    std::cout << "wrote torque-augmented trial to " << out_csv << "\n";
    return 0;
}

int cmd_gradcheck(const std::string& config_path, std::uint64_t seed,
                  const std::string& inject) {
    (void)config_path;
    auto results = run_gradcheck(seed, inject);
    bool all_pass = true;
    std::printf("%-18s %-14s %s\n", "primitive", "max_rel_err", "status");
    for (const GradCheckResult& r : results) {
        std::printf("%-18s %-14.3e %s\n", r.primitive.c_str(), r.max_rel_err,
                    r.pass ? "pass" : "FAIL");
        all_pass = all_pass && r.pass;
    }
    if (!all_pass) throw NonFinite("gradient check failed");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"EMG-driven joint kinematics: physics-informed training pipeline"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", dataset_dir, mode = "pinn";
    std::string checkpoint_path, trial_csv, out_csv, inject;
    std::optional<std::uint64_t> seed_opt;
    std::uint64_t gradcheck_seed = 0;
    double load_kg = 0.0, rate = 125.0;

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--config", config_path, "JSON config path");
    synth->add_option("--out", out_dir, "output directory");
    synth->add_option("--seed", seed_opt, "override the synthesis seed");

    auto* train_cmd = app.add_subcommand("train", "train a model");
    train_cmd->add_option("--config", config_path, "JSON config path");
    train_cmd->add_option("--dataset", dataset_dir, "dataset directory")->required();
    train_cmd->add_option("--mode", mode, "pinn or ann")
        ->check(CLI::IsMember({"pinn", "ann"}));
    train_cmd->add_option("--out", out_dir, "output directory");
    train_cmd->add_option("--seed", seed_opt, "override the training seed");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    eval_cmd->add_option("--config", config_path, "JSON config path");
    eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
    eval_cmd->add_option("--dataset", dataset_dir, "dataset directory")->required();
    eval_cmd->add_option("--out", out_dir, "output directory");

    auto* invdyn = app.add_subcommand("invdyn", "augment a trial CSV with benchmark torque");
    invdyn->add_option("--config", config_path, "JSON config path");
    invdyn->add_option("--trial", trial_csv, "input trial CSV")->required();
    invdyn->add_option("--out", out_csv, "output CSV")->required();
    invdyn->add_option("--load", load_kg, "hand load in kg");
    invdyn->add_option("--rate", rate, "sampling rate in Hz");

    auto* gradcheck = app.add_subcommand("gradcheck", "verify gradients against finite differences");
    gradcheck->add_option("--config", config_path, "JSON config path");
    gradcheck->add_option("--seed", gradcheck_seed, "random seed");
    gradcheck->add_option("--inject-wrong-gradient", inject,
                          "perturb the named primitive's gradient (self-test)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) return cmd_synth(config_path, out_dir, seed_opt);
        if (train_cmd->parsed())
            return cmd_train(config_path, dataset_dir, mode, out_dir, seed_opt);
        if (eval_cmd->parsed())
            return cmd_eval(config_path, checkpoint_path, dataset_dir, out_dir);
        if (invdyn->parsed()) return cmd_invdyn(config_path, trial_csv, out_csv, load_kg, rate);
        if (gradcheck->parsed()) return cmd_gradcheck(config_path, gradcheck_seed, inject);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}

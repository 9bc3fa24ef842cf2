#pragma once

// JSON configuration for the CLI pipeline. Strictly validated: unknown keys
// are rejected, and every default matches the recording/training protocol
// values where one exists.

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "emgpinn/data.hpp"
#include "emgpinn/dynamics.hpp"
#include "emgpinn/training.hpp"

namespace emgpinn {

struct Config {
    LimbModel model{SegmentParams{2.1, 0.32, 0.436, 0.022},
                    SegmentParams{1.2, 0.26, 0.43, 0.008}, 0.0, 9.81};
    EnvelopeSpec envelope;
    SmoothSpec smooth;            // angle smoothing before differentiation
    TrainConfig training;
    Architecture arch;
    SynthDatasetCfg synth;
    SplitSpec split_spec;
    std::uint64_t split_seed = 0;
    double reference_load = 4.0;  // angle normalization reference

    nlohmann::json resolved; // full resolved snapshot, written beside outputs
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& path,
                       std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(path + ": expected an object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw ConfigError(path + ": unknown key '" + key + "'");
    }
}

template <typename T>
void get_to(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

inline void parse_segment(const nlohmann::json& j, const std::string& path, SegmentParams& s) {
    check_keys(j, path, {"mass", "length", "com_ratio", "inertia_com"});
    get_to(j, "mass", s.mass);
    get_to(j, "length", s.length);
    get_to(j, "com_ratio", s.com_ratio);
    get_to(j, "inertia_com", s.inertia_com);
}

} // namespace detail

inline Config parse_config(const nlohmann::json& j) {
    using detail::check_keys;
    using detail::get_to;
    Config cfg;
    check_keys(j, "config", {"model", "signals", "training", "network", "data"});

    if (j.contains("model")) {
        const auto& jm = j.at("model");
        check_keys(jm, "model",
                   {"upper_arm", "forearm", "hand_load", "gravity", "anthropometrics",
                    "regression"});
        if (jm.contains("anthropometrics")) {
            const auto& ja = jm.at("anthropometrics");
            check_keys(ja, "model.anthropometrics",
                       {"height", "weight", "upper_arm_length", "forearm_length",
                        "arm_circumference", "biceps_circumference", "forearm_circumference",
                        "wrist_circumference"});
            Anthropometrics a;
            get_to(ja, "height", a.height);
            get_to(ja, "weight", a.weight);
            get_to(ja, "upper_arm_length", a.upper_arm_length);
            get_to(ja, "forearm_length", a.forearm_length);
            get_to(ja, "arm_circumference", a.arm_circumference);
            get_to(ja, "biceps_circumference", a.biceps_circumference);
            get_to(ja, "forearm_circumference", a.forearm_circumference);
            get_to(ja, "wrist_circumference", a.wrist_circumference);
            RegressionCoeffs rc;
            if (jm.contains("regression")) {
                const auto& jr = jm.at("regression");
                check_keys(jr, "model.regression", {"upper_arm", "forearm"});
                auto parse_reg = [&](const nlohmann::json& js, const std::string& p,
                                     SegmentRegression& r) {
                    check_keys(js, p,
                               {"mass_fraction", "com_ratio", "moi_intercept", "c_height",
                                "c_weight", "c_length", "c_circumference"});
                    get_to(js, "mass_fraction", r.mass_fraction);
                    get_to(js, "com_ratio", r.com_ratio);
                    get_to(js, "moi_intercept", r.moi_intercept);
                    get_to(js, "c_height", r.c_height);
                    get_to(js, "c_weight", r.c_weight);
                    get_to(js, "c_length", r.c_length);
                    get_to(js, "c_circumference", r.c_circumference);
                };
                if (jr.contains("upper_arm"))
                    parse_reg(jr.at("upper_arm"), "model.regression.upper_arm", rc.upper_arm);
                if (jr.contains("forearm"))
                    parse_reg(jr.at("forearm"), "model.regression.forearm", rc.forearm);
            }
            auto [ua, fa] = estimate_segment_params(a, rc);
            cfg.model.upper_arm = ua;
            cfg.model.forearm = fa;
        }
        if (jm.contains("upper_arm"))
            detail::parse_segment(jm.at("upper_arm"), "model.upper_arm", cfg.model.upper_arm);
        if (jm.contains("forearm"))
            detail::parse_segment(jm.at("forearm"), "model.forearm", cfg.model.forearm);
        get_to(jm, "hand_load", cfg.model.hand_load);
        get_to(jm, "gravity", cfg.model.gravity);
    }

    if (j.contains("signals")) {
        const auto& js = j.at("signals");
        check_keys(js, "signals",
                   {"bandpass_low_hz", "bandpass_high_hz", "bandpass_order", "lowpass_hz",
                    "lowpass_order", "zero_phase", "gaussian_sigma", "gaussian_half_width",
                    "gaussian_enabled"});
        get_to(js, "bandpass_low_hz", cfg.envelope.bandpass.low_hz);
        get_to(js, "bandpass_high_hz", cfg.envelope.bandpass.high_hz);
        get_to(js, "bandpass_order", cfg.envelope.bandpass.order);
        get_to(js, "lowpass_hz", cfg.envelope.lowpass.low_hz);
        get_to(js, "lowpass_order", cfg.envelope.lowpass.order);
        get_to(js, "zero_phase", cfg.envelope.zero_phase);
        get_to(js, "gaussian_sigma", cfg.smooth.sigma_samples);
        get_to(js, "gaussian_half_width", cfg.smooth.half_width_samples);
        get_to(js, "gaussian_enabled", cfg.smooth.enabled);
    }

    if (j.contains("training")) {
        const auto& jt = j.at("training");
        check_keys(jt, "training",
                   {"batch_size", "epochs_per_load", "lr0", "lr_step", "lr_gamma", "alpha",
                    "seed", "load_order", "adam_beta1", "adam_beta2", "adam_eps",
                    "stencil_h"});
        get_to(jt, "batch_size", cfg.training.batch_size);
        get_to(jt, "epochs_per_load", cfg.training.epochs_per_load);
        get_to(jt, "lr0", cfg.training.lr0);
        get_to(jt, "lr_step", cfg.training.lr_step);
        get_to(jt, "lr_gamma", cfg.training.lr_gamma);
        if (jt.contains("alpha")) {
            if (jt.at("alpha").is_string()) {
                if (jt.at("alpha").get<std::string>() != "auto")
                    throw ConfigError("training.alpha: must be a number or \"auto\"");
                cfg.training.alpha = -1.0;
            } else {
                cfg.training.alpha = jt.at("alpha").get<double>();
                if (cfg.training.alpha < 0.0)
                    throw ConfigError("training.alpha: must be >= 0");
            }
        }
        get_to(jt, "seed", cfg.training.seed);
        get_to(jt, "load_order", cfg.training.load_order);
        get_to(jt, "adam_beta1", cfg.training.adam_beta1);
        get_to(jt, "adam_beta2", cfg.training.adam_beta2);
        get_to(jt, "adam_eps", cfg.training.adam_eps);
        get_to(jt, "stencil_h", cfg.training.stencil_h);
        cfg.training.validate();
    }

    if (j.contains("network")) {
        const auto& jn = j.at("network");
        check_keys(jn, "network",
                   {"input_dim", "hidden_layers", "hidden_width", "output_dim"});
        get_to(jn, "input_dim", cfg.arch.input_dim);
        get_to(jn, "hidden_layers", cfg.arch.hidden_layers);
        get_to(jn, "hidden_width", cfg.arch.hidden_width);
        get_to(jn, "output_dim", cfg.arch.output_dim);
        cfg.arch.validate();
    }

    if (j.contains("data")) {
        const auto& jd = j.at("data");
        check_keys(jd, "data",
                   {"loads", "runs_per_load", "trials_per_run", "split", "split_seed",
                    "reference_load", "synth"});
        get_to(jd, "loads", cfg.synth.loads);
        get_to(jd, "runs_per_load", cfg.synth.runs_per_load);
        get_to(jd, "trials_per_run", cfg.synth.trials_per_run);
        get_to(jd, "split_seed", cfg.split_seed);
        get_to(jd, "reference_load", cfg.reference_load);
        if (jd.contains("split")) {
            const auto& js = jd.at("split");
            check_keys(js, "data.split", {"train", "val", "test"});
            get_to(js, "train", cfg.split_spec.train_runs);
            get_to(js, "val", cfg.split_spec.val_runs);
            get_to(js, "test", cfg.split_spec.test_runs);
        }
        if (jd.contains("synth")) {
            const auto& js = jd.at("synth");
            check_keys(js, "data.synth",
                       {"duration", "reps", "elbow_amplitude", "elbow_offset",
                        "shoulder_amplitude", "rate", "noise_std", "activation_gain",
                        "seed"});
            get_to(js, "duration", cfg.synth.traj.duration);
            get_to(js, "reps", cfg.synth.traj.reps);
            get_to(js, "elbow_amplitude", cfg.synth.traj.elbow_amplitude);
            get_to(js, "elbow_offset", cfg.synth.traj.elbow_offset);
            get_to(js, "shoulder_amplitude", cfg.synth.traj.shoulder_amplitude);
            get_to(js, "rate", cfg.synth.traj.rate);
            get_to(js, "noise_std", cfg.synth.noise_std);
            get_to(js, "activation_gain", cfg.synth.activation_gain);
            get_to(js, "seed", cfg.synth.seed);
        }
    }
    cfg.synth.smooth = cfg.smooth;
    cfg.model.validate();

    // Resolved snapshot of everything actually in effect.
    nlohmann::json r;
    r["model"] = {{"upper_arm",
                   {{"mass", cfg.model.upper_arm.mass},
                    {"length", cfg.model.upper_arm.length},
                    {"com_ratio", cfg.model.upper_arm.com_ratio},
                    {"inertia_com", cfg.model.upper_arm.inertia_com}}},
                  {"forearm",
                   {{"mass", cfg.model.forearm.mass},
                    {"length", cfg.model.forearm.length},
                    {"com_ratio", cfg.model.forearm.com_ratio},
                    {"inertia_com", cfg.model.forearm.inertia_com}}},
                  {"hand_load", cfg.model.hand_load},
                  {"gravity", cfg.model.gravity}};
    r["signals"] = {{"bandpass_low_hz", cfg.envelope.bandpass.low_hz},
                    {"bandpass_high_hz", cfg.envelope.bandpass.high_hz},
                    {"bandpass_order", cfg.envelope.bandpass.order},
                    {"lowpass_hz", cfg.envelope.lowpass.low_hz},
                    {"lowpass_order", cfg.envelope.lowpass.order},
                    {"zero_phase", cfg.envelope.zero_phase},
                    {"gaussian_sigma", cfg.smooth.sigma_samples},
                    {"gaussian_half_width", cfg.smooth.half_width_samples},
                    {"gaussian_enabled", cfg.smooth.enabled}};
    r["training"] = {{"batch_size", cfg.training.batch_size},
                     {"epochs_per_load", cfg.training.epochs_per_load},
                     {"lr0", cfg.training.lr0},
                     {"lr_step", cfg.training.lr_step},
                     {"lr_gamma", cfg.training.lr_gamma},
                     {"alpha", cfg.training.alpha_auto()
                                   ? nlohmann::json("auto")
                                   : nlohmann::json(cfg.training.alpha)},
                     {"seed", cfg.training.seed},
                     {"load_order", cfg.training.load_order},
                     {"adam_beta1", cfg.training.adam_beta1},
                     {"adam_beta2", cfg.training.adam_beta2},
                     {"adam_eps", cfg.training.adam_eps},
                     {"stencil_h", cfg.training.stencil_h},
                     {"time_derivative", "stencil"}};
    r["network"] = {{"input_dim", cfg.arch.input_dim},
                    {"hidden_layers", cfg.arch.hidden_layers},
                    {"hidden_width", cfg.arch.hidden_width},
                    {"output_dim", cfg.arch.output_dim}};
    r["data"] = {{"loads", cfg.synth.loads},
                 {"runs_per_load", cfg.synth.runs_per_load},
                 {"trials_per_run", cfg.synth.trials_per_run},
                 {"split",
                  {{"train", cfg.split_spec.train_runs},
                   {"val", cfg.split_spec.val_runs},
                   {"test", cfg.split_spec.test_runs}}},
                 {"split_seed", cfg.split_seed},
                 {"reference_load", cfg.reference_load},
                 {"synth",
                  {{"duration", cfg.synth.traj.duration},
                   {"reps", cfg.synth.traj.reps},
                   {"elbow_amplitude", cfg.synth.traj.elbow_amplitude},
                   {"elbow_offset", cfg.synth.traj.elbow_offset},
                   {"shoulder_amplitude", cfg.synth.traj.shoulder_amplitude},
                   {"rate", cfg.synth.traj.rate},
                   {"noise_std", cfg.synth.noise_std},
                   {"activation_gain", cfg.synth.activation_gain},
                   {"seed", cfg.synth.seed}}}};
    cfg.resolved = r;
    return cfg;
}

inline Config load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config: " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_config(j);
}

inline Config default_config() { return parse_config(nlohmann::json::object()); }

inline std::string config_hash(const Config& cfg) {
    // FNV-1a over the resolved snapshot; stable within a schema version.
    const std::string s = cfg.resolved.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream ss;
    ss << std::hex << h;
    return ss.str();
}

} // namespace emgpinn

#pragma once

// Trial/run dataset model, CSV ingestion, the train/val/test split,
// benchmark-torque computation and the synthetic-data generator.

#include <json.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "emgpinn/dynamics.hpp"
#include "emgpinn/signals.hpp"

namespace emgpinn {

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonUniformSampling : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InsufficientRuns : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr int kEmgChannels = 4;

// One movement repetition: time-aligned EMG envelopes, joint angles, and
// (optionally) derived velocities, accelerations and benchmark torques.
// Angle row 0 is the shoulder, row 1 the elbow.
struct Trial {
    double load_kg = 0.0;
    double rate = 125.0; // Hz
    Eigen::VectorXd t;   // s
    Eigen::MatrixXd emg; // 4 x n, MVC-normalized
    Eigen::MatrixXd q;   // 2 x n, rad
    bool has_derived = false;
    Eigen::MatrixXd qd, qdd, tau; // 2 x n each when has_derived

    Eigen::Index samples() const { return t.size(); }
    double duration() const { return samples() > 1 ? t[samples() - 1] - t[0] : 0.0; }

    void validate() const {
        if (load_kg < 0.0) throw SchemaError("Trial: load must be >= 0");
        if (!(rate > 0.0)) throw SchemaError("Trial: rate must be > 0");
        const Eigen::Index n = t.size();
        if (n < 2) throw SchemaError("Trial: need at least 2 samples");
        if (emg.rows() != kEmgChannels || emg.cols() != n || q.rows() != 2 || q.cols() != n)
            throw SchemaError("Trial: column shape mismatch");
        const double dt = 1.0 / rate;
        for (Eigen::Index i = 1; i < n; ++i) {
            const double step = t[i] - t[i - 1];
            if (!(step > 0.0)) throw SchemaError("Trial: time not strictly increasing at row " +
                                                 std::to_string(i));
            if (std::abs(step - dt) > 1e-9)
                throw NonUniformSampling("Trial: non-uniform sampling at row " +
                                         std::to_string(i));
        }
        if (!emg.allFinite() || !q.allFinite()) throw SchemaError("Trial: non-finite value");
        if ((emg.array() < 0.0).any() || (emg.array() > 1.5).any())
            throw SchemaError("Trial: EMG outside [0, 1.5]");
        if (has_derived &&
            (!qd.allFinite() || !qdd.allFinite() || !tau.allFinite() || qd.cols() != n ||
             qdd.cols() != n || tau.cols() != n))
            throw SchemaError("Trial: bad derived columns");
    }
};

struct Run {
    double load_kg = 0.0;
    int index = 0;
    std::vector<Trial> trials;
};

struct RunSet {
    std::vector<Run> runs;

    std::vector<double> loads() const {
        std::vector<double> out;
        for (const Run& r : runs)
            if (std::find(out.begin(), out.end(), r.load_kg) == out.end())
                out.push_back(r.load_kg);
        std::sort(out.begin(), out.end());
        return out;
    }
};

struct SplitSpec {
    int train_runs = 2;
    int val_runs = 1;
    int test_runs = 1;
};

struct DatasetSplit {
    RunSet train, val, test;
};

// Deterministic per-load permutation by seed; the three parts cover all runs
// of each load and are pairwise disjoint.
inline DatasetSplit split(const RunSet& runs, const SplitSpec& spec, std::uint64_t seed) {
    DatasetSplit out;
    for (double load : runs.loads()) {
        std::vector<const Run*> of_load;
        for (const Run& r : runs.runs)
            if (r.load_kg == load) of_load.push_back(&r);
        const int need = spec.train_runs + spec.val_runs + spec.test_runs;
        if (static_cast<int>(of_load.size()) != need)
            throw InsufficientRuns("split: load " + std::to_string(load) + " has " +
                                   std::to_string(of_load.size()) + " runs, spec needs " +
                                   std::to_string(need));
        std::vector<int> idx(of_load.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::mt19937_64 rng(seed ^ std::hash<double>{}(load));
        std::shuffle(idx.begin(), idx.end(), rng);
        int k = 0;
        for (int i = 0; i < spec.train_runs; ++i) out.train.runs.push_back(*of_load[idx[k++]]);
        for (int i = 0; i < spec.val_runs; ++i) out.val.runs.push_back(*of_load[idx[k++]]);
        for (int i = 0; i < spec.test_runs; ++i) out.test.runs.push_back(*of_load[idx[k++]]);
    }
    return out;
}

// --- Benchmark torque -------------------------------------------------------

struct SmoothSpec {
    double sigma_samples = 10.0; // matches the recording pipeline defaults
    int half_width_samples = 6;
    bool enabled = true;
};

// Gaussian-smooths the angles, differentiates twice with central differences
// and evaluates the inverse dynamics row by row with the trial's load folded
// into the model. Appends qd, qdd and tau columns.
inline Trial benchmark_torque(const Trial& trial, const LimbModel& model,
                              const SmoothSpec& smooth = {}) {
    trial.validate();
    const LimbModel loaded = model.with_load(trial.load_kg);
    loaded.validate();

    UniformSeries ang;
    ang.rate = trial.rate;
    ang.t0 = trial.t[0];
    ang.values = trial.q;
    if (smooth.enabled)
        ang = gaussian_smooth(ang, smooth.sigma_samples, smooth.half_width_samples);
    UniformSeries vel = central_difference(ang, 1);
    UniformSeries acc = central_difference(ang, 2);

    Trial out = trial;
    out.has_derived = true;
    out.qd = vel.values;
    out.qdd = acc.values;
    out.tau.resize(2, trial.samples());
    const DynCoeffs c = dyn_coeffs(loaded);
    for (Eigen::Index i = 0; i < trial.samples(); ++i) {
        Vec2<double> q{ang.values(0, i), ang.values(1, i)};
        Vec2<double> qd{vel.values(0, i), vel.values(1, i)};
        Vec2<double> qdd{acc.values(0, i), acc.values(1, i)};
        Vec2<double> tau = inverse_dynamics_t(c, q, qd, qdd);
        out.tau(0, i) = tau[0];
        out.tau(1, i) = tau[1];
    }
    return out;
}

// --- Minimum-jerk synthetic trajectories ------------------------------------

struct SynthTrajCfg {
    double duration = 1.2;         // s per trial
    int reps = 1;                  // flexion-extension cycles per trial
    double elbow_amplitude = 1.2;  // rad
    double elbow_offset = 0.4;     // rad
    double shoulder_amplitude = 0.25; // rad
    double rate = 125.0;           // Hz

    void validate() const {
        if (!(duration > 0.0) || reps < 1 || !(rate > 0.0))
            throw ConfigError("SynthTrajCfg: bad duration/reps/rate");
        if (elbow_offset < 0.0 || elbow_amplitude <= 0.0 ||
            elbow_offset + elbow_amplitude > 2.6)
            throw ConfigError("SynthTrajCfg: elbow range must stay within [0, 2.6] rad");
    }
};

// Closed-form minimum-jerk flexion-extension cycles; C2 smooth with zero
// velocity and acceleration at segment boundaries. The shoulder follows the
// same profile at smaller amplitude.
struct MinJerkTrajectory {
    SynthTrajCfg cfg;

    explicit MinJerkTrajectory(const SynthTrajCfg& c) : cfg(c) { cfg.validate(); }

    // s(u) = 10u^3 - 15u^4 + 6u^5 and derivatives
    static double s(double u) { return ((6 * u - 15) * u + 10) * u * u * u; }
    static double sd(double u) { return ((30 * u - 60) * u + 30) * u * u; }
    static double sdd(double u) { return ((120 * u - 180) * u + 60) * u; }

    // Phase position within the trial: returns (profile, d/dt, d2/dt2) in [0,1].
    void profile(double t, double& p, double& pd, double& pdd) const {
        const double rep_dur = cfg.duration / cfg.reps;
        double local = std::clamp(t, 0.0, cfg.duration);
        int rep = std::min(static_cast<int>(local / rep_dur), cfg.reps - 1);
        local -= rep * rep_dur;
        const double half = rep_dur / 2.0;
        if (local <= half) {
            const double u = local / half;
            p = s(u);
            pd = sd(u) / half;
            pdd = sdd(u) / (half * half);
        } else {
            const double u = (local - half) / half;
            p = 1.0 - s(u);
            pd = -sd(u) / half;
            pdd = -sdd(u) / (half * half);
        }
    }

    Vec2<double> q(double t) const {
        double p, pd, pdd;
        profile(t, p, pd, pdd);
        return {cfg.shoulder_amplitude * p, cfg.elbow_offset + cfg.elbow_amplitude * p};
    }
    Vec2<double> qd(double t) const {
        double p, pd, pdd;
        profile(t, p, pd, pdd);
        return {cfg.shoulder_amplitude * pd, cfg.elbow_amplitude * pd};
    }
    Vec2<double> qdd(double t) const {
        double p, pd, pdd;
        profile(t, p, pd, pdd);
        return {cfg.shoulder_amplitude * pdd, cfg.elbow_amplitude * pdd};
    }
};

// Sampled angle trace at cfg.rate (2 x n, shoulder row then elbow row).
inline UniformSeries synth_trajectory(const SynthTrajCfg& cfg) {
    MinJerkTrajectory traj(cfg);
    const Eigen::Index n = static_cast<Eigen::Index>(std::llround(cfg.duration * cfg.rate)) + 1;
    UniformSeries out;
    out.rate = cfg.rate;
    out.t0 = 0.0;
    out.values.resize(2, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec2<double> q = traj.q(static_cast<double>(i) / cfg.rate);
        out.values(0, i) = q[0];
        out.values(1, i) = q[1];
    }
    return out;
}

// --- Synthetic EMG -----------------------------------------------------------

struct SynthEmgCfg {
    double noise_std = 0.0;
    double activation_gain = 0.9; // full-scale activation at tau_scale
    double tau_scale = 0.0;       // N m mapped to full activation; 0 = per-trial peak
    std::uint64_t seed = 0;
};

// Agonist channels (biceps analogs) follow rectified positive elbow torque,
// antagonists (triceps analogs) the rectified negative part. Each channel is
// low-passed at 7 Hz, scaled, and clipped noise is added.
inline Trial synth_emg(const Trial& trial_with_tau, const SynthEmgCfg& cfg) {
    if (!trial_with_tau.has_derived)
        throw ConfigError("synth_emg: trial has no torque columns");
    if (cfg.noise_std < 0.0 || cfg.activation_gain <= 0.0)
        throw ConfigError("synth_emg: bad noise/gain");

    const Eigen::Index n = trial_with_tau.samples();
    const Eigen::RowVectorXd tau_el = trial_with_tau.tau.row(1);
    Eigen::RowVectorXd pos = tau_el.cwiseMax(0.0);
    Eigen::RowVectorXd neg = (-tau_el).cwiseMax(0.0);

    double scale = cfg.tau_scale;
    if (!(scale > 0.0)) scale = std::max(tau_el.cwiseAbs().maxCoeff(), 1e-12);

    UniformSeries drive;
    drive.rate = trial_with_tau.rate;
    drive.t0 = trial_with_tau.t[0];
    drive.values.resize(kEmgChannels, n);
    drive.values.row(0) = pos;        // biceps long head analog
    drive.values.row(1) = 0.8 * pos;  // biceps short head analog
    drive.values.row(2) = neg;        // triceps long head analog
    drive.values.row(3) = 0.8 * neg;  // triceps lateral head analog

    FilterSpec lp{FilterKind::Lowpass, 7.0, 0.0, 4};
    UniformSeries env = butterworth_filter(drive, lp, /*zero_phase=*/true);
    Eigen::MatrixXd e = env.values * (cfg.activation_gain / scale);

    if (cfg.noise_std > 0.0) {
        std::mt19937_64 rng(cfg.seed);
        std::normal_distribution<double> dist(0.0, cfg.noise_std);
        for (Eigen::Index r = 0; r < e.rows(); ++r)
            for (Eigen::Index c = 0; c < e.cols(); ++c) e(r, c) += dist(rng);
    }
    e = e.cwiseMax(0.0).cwiseMin(1.5);

    Trial out = trial_with_tau;
    out.emg = e;
    return out;
}

// --- Full synthetic dataset ---------------------------------------------------

struct SynthDatasetCfg {
    std::vector<double> loads{0.0, 2.0, 4.0};
    int runs_per_load = 4;
    int trials_per_run = 4;
    SynthTrajCfg traj;
    double noise_std = 0.0;
    double activation_gain = 0.9;
    std::uint64_t seed = 0;
    SmoothSpec smooth; // applied in benchmark_torque
};

namespace detail {
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                              std::uint64_t c) {
    std::uint64_t h = seed;
    for (std::uint64_t v : {a + 1, b + 1, c + 1}) {
        h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
}
} // namespace detail

// synth_trajectory -> benchmark_torque -> synth_emg per trial, per-load model
// with the load mass folded in. Fully deterministic given the seed.
inline RunSet make_synthetic_dataset(const LimbModel& model, const SynthDatasetCfg& cfg) {
    model.validate();
    cfg.traj.validate();

    // Characteristic torque for the EMG scaling: peak gravity torque of the
    // most heavily loaded model.
    double max_load = 0.0;
    for (double l : cfg.loads) max_load = std::max(max_load, l);
    const DynCoeffs ch = dyn_coeffs(model.with_load(max_load));
    const double tau_scale = std::max(ch.g * ch.b2 * 1.5, 1e-9);

    RunSet set;
    for (std::size_t li = 0; li < cfg.loads.size(); ++li) {
        const double load = cfg.loads[li];
        for (int run = 0; run < cfg.runs_per_load; ++run) {
            Run r;
            r.load_kg = load;
            r.index = run;
            for (int k = 0; k < cfg.trials_per_run; ++k) {
                std::mt19937_64 rng(detail::mix_seed(cfg.seed, li, run, k));
                std::uniform_real_distribution<double> u(-1.0, 1.0);

                SynthTrajCfg tc = cfg.traj;
                tc.elbow_amplitude *= 1.0 + 0.2 * u(rng);
                tc.elbow_offset = std::max(0.0, tc.elbow_offset + 0.08 * u(rng));
                tc.shoulder_amplitude *= 1.0 + 0.2 * u(rng);
                if (tc.elbow_offset + tc.elbow_amplitude > 2.6)
                    tc.elbow_amplitude = 2.6 - tc.elbow_offset;

                UniformSeries traj = synth_trajectory(tc);
                Trial trial;
                trial.load_kg = load;
                trial.rate = tc.rate;
                trial.t.resize(traj.samples());
                for (Eigen::Index i = 0; i < traj.samples(); ++i)
                    trial.t[i] = static_cast<double>(i) / tc.rate;
                trial.q = traj.values;
                trial.emg = Eigen::MatrixXd::Zero(kEmgChannels, traj.samples());

                trial = benchmark_torque(trial, model, cfg.smooth);

                SynthEmgCfg ec;
                ec.noise_std = cfg.noise_std;
                ec.activation_gain = cfg.activation_gain;
                ec.tau_scale = tau_scale;
                ec.seed = detail::mix_seed(cfg.seed + 0x5bd1e995, li, run, k);
                trial = synth_emg(trial, ec);

                trial.validate();
                r.trials.push_back(std::move(trial));
            }
            set.runs.push_back(std::move(r));
        }
    }
    return set;
}

// --- CSV / manifest I/O -------------------------------------------------------

inline constexpr const char* kTrialHeaderBase =
    "t,emg_bic_long,emg_bic_short,emg_tri_long,emg_tri_lat,q_shoulder,q_elbow";
inline constexpr const char* kTrialHeaderDerived =
    ",qd_shoulder,qd_elbow,qdd_shoulder,qdd_elbow,tau_shoulder,tau_elbow";
inline constexpr int kSchemaVersion = 1;

namespace detail {
inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
} // namespace detail

inline void save_trial_csv(const std::filesystem::path& path, const Trial& trial) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f << kTrialHeaderBase;
    if (trial.has_derived) f << kTrialHeaderDerived;
    f << "\n";
    for (Eigen::Index i = 0; i < trial.samples(); ++i) {
        f << detail::fmt(trial.t[i]);
        for (int ch = 0; ch < kEmgChannels; ++ch) f << ',' << detail::fmt(trial.emg(ch, i));
        f << ',' << detail::fmt(trial.q(0, i)) << ',' << detail::fmt(trial.q(1, i));
        if (trial.has_derived) {
            for (const Eigen::MatrixXd* m : {&trial.qd, &trial.qdd, &trial.tau})
                f << ',' << detail::fmt((*m)(0, i)) << ',' << detail::fmt((*m)(1, i));
        }
        f << "\n";
    }
}

inline Trial load_trial_csv(const std::filesystem::path& path, double load_kg, double rate) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(f, line)) throw SchemaError(path.string() + ": empty file");
    const bool derived = line == std::string(kTrialHeaderBase) + kTrialHeaderDerived;
    if (!derived && line != kTrialHeaderBase)
        throw SchemaError(path.string() + ": unexpected header '" + line + "'");
    const int ncols = derived ? 13 : 7;

    std::vector<std::array<double, 13>> rows;
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::array<double, 13> row{};
        std::stringstream ss(line);
        std::string cell;
        for (int c = 0; c < ncols; ++c) {
            if (!std::getline(ss, cell, ','))
                throw SchemaError(path.string() + ": row " + std::to_string(lineno) +
                                  " has too few columns");
            try {
                std::size_t used = 0;
                row[c] = std::stod(cell, &used);
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw SchemaError(path.string() + ": row " + std::to_string(lineno) +
                                  " column " + std::to_string(c + 1) + ": bad number '" +
                                  cell + "'");
            }
            if (!std::isfinite(row[c]))
                throw SchemaError(path.string() + ": row " + std::to_string(lineno) +
                                  " column " + std::to_string(c + 1) + ": non-finite value");
        }
        if (std::getline(ss, cell, ','))
            throw SchemaError(path.string() + ": row " + std::to_string(lineno) +
                              " has too many columns");
        rows.push_back(row);
    }
    if (rows.size() < 2) throw SchemaError(path.string() + ": too few rows");

    Trial trial;
    trial.load_kg = load_kg;
    trial.rate = rate;
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    trial.t.resize(n);
    trial.emg.resize(kEmgChannels, n);
    trial.q.resize(2, n);
    trial.has_derived = derived;
    if (derived) {
        trial.qd.resize(2, n);
        trial.qdd.resize(2, n);
        trial.tau.resize(2, n);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = rows[i];
        trial.t[i] = r[0];
        for (int ch = 0; ch < kEmgChannels; ++ch) trial.emg(ch, i) = r[1 + ch];
        trial.q(0, i) = r[5];
        trial.q(1, i) = r[6];
        if (derived) {
            trial.qd(0, i) = r[7];
            trial.qd(1, i) = r[8];
            trial.qdd(0, i) = r[9];
            trial.qdd(1, i) = r[10];
            trial.tau(0, i) = r[11];
            trial.tau(1, i) = r[12];
        }
    }
    trial.validate();
    return trial;
}

inline std::string run_dir_name(double load_kg, int index) {
    std::ostringstream ss;
    if (load_kg == std::floor(load_kg))
        ss << "run_" << static_cast<long long>(load_kg) << "kg_" << index;
    else
        ss << "run_" << load_kg << "kg_" << index;
    return ss.str();
}

inline void save_dataset(const std::filesystem::path& dir, const RunSet& set,
                         std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["schema_version"] = kSchemaVersion;
    manifest["seed"] = seed;
    manifest["loads"] = set.loads();
    nlohmann::json jruns = nlohmann::json::array();
    for (const Run& r : set.runs) {
        const std::string rd = run_dir_name(r.load_kg, r.index);
        std::filesystem::create_directories(dir / rd);
        for (std::size_t k = 0; k < r.trials.size(); ++k)
            save_trial_csv(dir / rd / ("trial_" + std::to_string(k) + ".csv"), r.trials[k]);
        jruns.push_back({{"dir", rd},
                         {"load_kg", r.load_kg},
                         {"index", r.index},
                         {"rate_hz", r.trials.empty() ? 125.0 : r.trials.front().rate},
                         {"trials", r.trials.size()}});
    }
    manifest["runs"] = jruns;
    std::ofstream mf(dir / "manifest.json");
    mf << manifest.dump(2) << "\n";
}

inline RunSet load_trials(const std::filesystem::path& dir) {
    const auto mpath = dir / "manifest.json";
    std::ifstream mf(mpath);
    if (!mf) throw SchemaError("missing manifest: " + mpath.string());
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(mpath.string() + ": " + e.what());
    }
    if (manifest.value("schema_version", -1) != kSchemaVersion)
        throw SchemaError(mpath.string() + ": unsupported schema version");

    RunSet set;
    for (const auto& jr : manifest.at("runs")) {
        Run r;
        r.load_kg = jr.at("load_kg").get<double>();
        r.index = jr.at("index").get<int>();
        const double rate = jr.at("rate_hz").get<double>();
        const auto n_trials = jr.at("trials").get<std::size_t>();
        const std::filesystem::path rd = dir / jr.at("dir").get<std::string>();
        for (std::size_t k = 0; k < n_trials; ++k)
            r.trials.push_back(
                load_trial_csv(rd / ("trial_" + std::to_string(k) + ".csv"), r.load_kg, rate));
        set.runs.push_back(std::move(r));
    }
    return set;
}

} // namespace emgpinn

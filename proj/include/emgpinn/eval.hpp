#pragma once

// RMSE and Pearson correlation metrics, per-trial evaluation with
// mean +/- std aggregation per (joint, load), and trace export for
// prediction-vs-ground-truth plots.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "emgpinn/data.hpp"
#include "emgpinn/network.hpp"

namespace emgpinn {

struct LengthMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct EmptyInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ConstantInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct IOError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double rmse(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat) {
    if (y.size() == 0) throw EmptyInput("rmse: empty input");
    if (y.size() != yhat.size()) throw LengthMismatch("rmse: length mismatch");
    return std::sqrt((y - yhat).squaredNorm() / static_cast<double>(y.size()));
}

inline double pearson_r(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat) {
    if (y.size() != yhat.size()) throw LengthMismatch("pearson_r: length mismatch");
    if (y.size() < 2) throw EmptyInput("pearson_r: need at least 2 samples");
    const Eigen::ArrayXd a = y.array() - y.mean();
    const Eigen::ArrayXd b = yhat.array() - yhat.mean();
    const double sa = std::sqrt((a * a).sum());
    const double sb = std::sqrt((b * b).sum());
    if (sa == 0.0 || sb == 0.0) throw ConstantInput("pearson_r: constant sequence");
    const double dot = (a * b).sum();
    const double r = std::clamp(dot / (sa * sb), -1.0, 1.0);
    if (std::abs(r) < 0.7) return r;
    // Near +/-1 the direct quotient loses the last bits to cancellation.
    // The magnitude via the projection residual, |r| = sqrt(1 - q^2) with
    // q = ||b - proj_a b|| / ||b||, is accurate there and gives exactly
    // +/-1 when b is an affine image of a.
    const Eigen::ArrayXd res = b - (dot / (sa * sa)) * a;
    const double q = std::sqrt((res * res).sum()) / sb;
    return std::copysign(std::sqrt(std::max(0.0, 1.0 - q * q)), dot);
}

struct TrialMetrics {
    int joint = 0; // 0 shoulder, 1 elbow
    double load_kg = 0;
    int run_index = 0;
    int trial_index = 0;
    double rmse_norm = 0; // normalized angle units
    double rmse_rad = 0;
    double r = 0;
    bool r_defined = true;
};

struct CellAggregate {
    double rmse_mean = 0, rmse_std = 0;
    double r_mean = 0, r_std = 0;
    int n_trials = 0;
};

struct EvalReport {
    std::string model_tag; // "pinn" or "ann"
    std::string aggregation = "mean±std across test trials";
    std::vector<TrialMetrics> rows;
    // keyed by (joint, load)
    std::map<std::pair<int, double>, CellAggregate> cells;
};

namespace detail {
inline std::pair<double, double> mean_std(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    return {mean, std::sqrt(var)};
}
} // namespace detail

// Predicts each test trial from its EMG + normalized time inputs and scores
// per-joint RMSE (normalized and radians) and Pearson R. Metrics are
// aggregated mean +/- std per (joint, load) across test trials.
inline EvalReport evaluate(const MlpParams& params, const RunSet& test,
                           const NormSpec& norm, const std::string& tag) {
    if (test.runs.empty()) throw EmptyInput("evaluate: empty test set");
    EvalReport report;
    report.model_tag = tag;

    for (const Run& run : test.runs) {
        for (std::size_t k = 0; k < run.trials.size(); ++k) {
            const Trial& tr = run.trials[k];
            const Eigen::Index n = tr.samples();
            Eigen::MatrixXd x(params.arch.input_dim, n);
            x.topRows(kEmgChannels) = tr.emg;
            const double dur = std::max(tr.duration(), 1e-9);
            for (Eigen::Index i = 0; i < n; ++i)
                x(params.arch.input_dim - 1, i) = (tr.t[i] - tr.t[0]) / dur;
            Eigen::MatrixXd yhat = forward(params, x);

            for (int j = 0; j < 2; ++j) {
                Eigen::VectorXd truth_norm(n), pred_norm(n);
                for (Eigen::Index i = 0; i < n; ++i) {
                    truth_norm[i] =
                        (tr.q(j, i) - norm.angle_offset[j]) / norm.angle_scale[j];
                    pred_norm[i] = yhat(j, i);
                }
                TrialMetrics m;
                m.joint = j;
                m.load_kg = run.load_kg;
                m.run_index = run.index;
                m.trial_index = static_cast<int>(k);
                m.rmse_norm = rmse(truth_norm, pred_norm);
                m.rmse_rad = m.rmse_norm * norm.angle_scale[j];
                try {
                    m.r = pearson_r(truth_norm, pred_norm);
                } catch (const ConstantInput&) {
                    m.r = 0.0;
                    m.r_defined = false;
                }
                report.rows.push_back(m);
            }
        }
    }

    std::map<std::pair<int, double>, std::pair<std::vector<double>, std::vector<double>>> acc;
    for (const TrialMetrics& m : report.rows) {
        auto& cell = acc[{m.joint, m.load_kg}];
        cell.first.push_back(m.rmse_norm);
        if (m.r_defined) cell.second.push_back(m.r);
    }
    for (const auto& [key, vals] : acc) {
        CellAggregate c;
        std::tie(c.rmse_mean, c.rmse_std) = detail::mean_std(vals.first);
        std::tie(c.r_mean, c.r_std) = detail::mean_std(vals.second);
        c.n_trials = static_cast<int>(vals.first.size());
        report.cells[key] = c;
    }
    return report;
}

// One row per sample: time, then per-joint normalized truth and prediction.
inline void export_traces(const MlpParams& params, const Trial& trial, const NormSpec& norm,
                          const std::filesystem::path& out) {
    std::ofstream f(out);
    if (!f) throw IOError("export_traces: cannot open " + out.string());
    const Eigen::Index n = trial.samples();
    Eigen::MatrixXd x(params.arch.input_dim, n);
    x.topRows(kEmgChannels) = trial.emg;
    const double dur = std::max(trial.duration(), 1e-9);
    for (Eigen::Index i = 0; i < n; ++i)
        x(params.arch.input_dim - 1, i) = (trial.t[i] - trial.t[0]) / dur;
    Eigen::MatrixXd yhat = forward(params, x);

    f << "t,q_shoulder_true,q_shoulder_pred,q_elbow_true,q_elbow_pred\n";
    for (Eigen::Index i = 0; i < n; ++i) {
        f << detail::fmt(trial.t[i]);
        for (int j = 0; j < 2; ++j) {
            const double truth = (trial.q(j, i) - norm.angle_offset[j]) / norm.angle_scale[j];
            f << ',' << detail::fmt(truth) << ',' << detail::fmt(yhat(j, i));
        }
        f << "\n";
    }
}

// Report CSV mirroring the per-(joint, load) aggregate layout.
inline void write_report_csv(const EvalReport& report, const std::filesystem::path& out) {
    std::ofstream f(out);
    if (!f) throw IOError("write_report_csv: cannot open " + out.string());
    f << "# aggregation: " << report.aggregation << "\n";
    f << "model,joint,load_kg,rmse_mean,rmse_std,r_mean,r_std,n_trials\n";
    for (const auto& [key, c] : report.cells) {
        f << report.model_tag << ',' << (key.first == 0 ? "shoulder" : "elbow") << ','
          << key.second << ',' << c.rmse_mean << ',' << c.rmse_std << ',' << c.r_mean << ','
          << c.r_std << ',' << c.n_trials << "\n";
    }
}

inline nlohmann::json report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["model"] = report.model_tag;
    j["aggregation"] = report.aggregation;
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& [key, c] : report.cells) {
        cells.push_back({{"joint", key.first == 0 ? "shoulder" : "elbow"},
                         {"load_kg", key.second},
                         {"rmse_mean", c.rmse_mean},
                         {"rmse_std", c.rmse_std},
                         {"r_mean", c.r_mean},
                         {"r_std", c.r_std},
                         {"n_trials", c.n_trials}});
    }
    j["cells"] = cells;
    nlohmann::json rows = nlohmann::json::array();
    for (const TrialMetrics& m : report.rows) {
        rows.push_back({{"joint", m.joint},
                        {"load_kg", m.load_kg},
                        {"run", m.run_index},
                        {"trial", m.trial_index},
                        {"rmse_norm", m.rmse_norm},
                        {"rmse_rad", m.rmse_rad},
                        {"r", m.r},
                        {"r_defined", m.r_defined}});
    }
    j["trials"] = rows;
    return j;
}

} // namespace emgpinn

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "emgpinn/data.hpp"
#include "emgpinn/eval.hpp"
#include "emgpinn/training.hpp"

using namespace emgpinn;
namespace fs = std::filesystem;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

LimbModel test_model() {
    return LimbModel{SegmentParams{2.1, 0.32, 0.436, 0.022},
                     SegmentParams{1.2, 0.26, 0.43, 0.008}, 0.0, 9.81};
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("emgpinn_eval_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST(Rmse, KnownValuesAndErrors) {
    EXPECT_DOUBLE_EQ(rmse(vec({0, 0}), vec({3, 4})), std::sqrt(12.5));
    EXPECT_DOUBLE_EQ(rmse(vec({1, 2, 3}), vec({1, 2, 3})), 0.0);
    EXPECT_DOUBLE_EQ(rmse(vec({2}), vec({5})), 3.0);
    EXPECT_THROW(rmse(vec({1}), vec({1, 2})), LengthMismatch);
    EXPECT_THROW(rmse(Eigen::VectorXd(), Eigen::VectorXd()), EmptyInput);
}

TEST(Pearson, KnownValuesInvariancesAndErrors) {
    EXPECT_DOUBLE_EQ(pearson_r(vec({1, 2, 3}), vec({1, 3, 2})), 0.5);
    EXPECT_DOUBLE_EQ(pearson_r(vec({1, 2, 3}), vec({1, 2, 3})), 1.0);
    EXPECT_DOUBLE_EQ(pearson_r(vec({1, 2, 3}), vec({3, 2, 1})), -1.0);

    // invariance under affine maps with positive slope
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    Eigen::VectorXd a(20), b(20);
    for (int i = 0; i < 20; ++i) {
        a[i] = u(rng);
        b[i] = u(rng);
    }
    const double r0 = pearson_r(a, b);
    EXPECT_NEAR(pearson_r(a, (2.5 * b.array() + 7.0).matrix()), r0, 1e-12);
    EXPECT_NEAR(pearson_r(a, (-1.0 * b.array()).matrix()), -r0, 1e-12);
    EXPECT_NEAR(pearson_r(a, a), 1.0, 1e-15);
    EXPECT_LE(std::abs(r0), 1.0);

    EXPECT_THROW(pearson_r(vec({1, 1, 1}), vec({1, 2, 3})), ConstantInput);
    EXPECT_THROW(pearson_r(vec({1}), vec({2})), EmptyInput);
    EXPECT_THROW(pearson_r(vec({1, 2}), vec({1, 2, 3})), LengthMismatch);
}

TEST(Evaluate, PerfectPredictorScoresPerfectly) {
    // Evaluate against a network, then rewrite the truth as exactly the
    // network's own output: RMSE 0, R 1 on every (joint, trial).
    SynthDatasetCfg cfg;
    cfg.runs_per_load = 1;
    cfg.trials_per_run = 2;
    cfg.traj.duration = 0.8;
    cfg.seed = 2;
    cfg.smooth.enabled = false;
    RunSet set = make_synthetic_dataset(test_model(), cfg);

    Architecture arch{5, 2, 6, 2};
    MlpParams p = init(arch, 44);
    NormSpec norm = make_norm_spec(set, 4.0);

    RunSet perfect = set;
    for (emgpinn::Run& run : perfect.runs)
        for (Trial& tr : run.trials) {
            Eigen::MatrixXd x(5, tr.samples());
            x.topRows(4) = tr.emg;
            const double dur = tr.duration();
            for (Eigen::Index i = 0; i < tr.samples(); ++i)
                x(4, i) = (tr.t[i] - tr.t[0]) / dur;
            Eigen::MatrixXd yhat = forward(p, x);
            for (Eigen::Index i = 0; i < tr.samples(); ++i)
                for (int j = 0; j < 2; ++j)
                    tr.q(j, i) = yhat(j, i) * norm.angle_scale[j] + norm.angle_offset[j];
            tr.has_derived = false;
        }

    EvalReport rep = evaluate(p, perfect, norm, "pinn");
    EXPECT_EQ(rep.model_tag, "pinn");
    ASSERT_FALSE(rep.rows.empty());
    for (const TrialMetrics& m : rep.rows) {
        EXPECT_LT(m.rmse_norm, 1e-12);
        EXPECT_LT(m.rmse_rad, 1e-11);
        EXPECT_TRUE(m.r_defined);
        EXPECT_NEAR(m.r, 1.0, 1e-9);
    }
    for (const auto& [key, cell] : rep.cells) {
        EXPECT_LT(cell.rmse_mean, 1e-12);
        EXPECT_NEAR(cell.r_mean, 1.0, 1e-9);
        EXPECT_EQ(cell.n_trials, 2);
    }
}

TEST(Evaluate, ConstantTruthMarksRUndefined) {
    Trial tr;
    tr.load_kg = 0.0;
    tr.rate = 125.0;
    const Eigen::Index n = 40;
    tr.t.resize(n);
    tr.emg = Eigen::MatrixXd::Constant(4, n, 0.3);
    tr.q = Eigen::MatrixXd::Constant(2, n, 0.5);
    for (Eigen::Index i = 0; i < n; ++i) tr.t[i] = static_cast<double>(i) / tr.rate;

    RunSet set;
    set.runs.push_back(emgpinn::Run{0.0, 0, {tr}});
    NormSpec norm;
    norm.input_offset = Eigen::VectorXd::Zero(5);
    norm.input_scale = Eigen::VectorXd::Ones(5);

    MlpParams p = init(Architecture{5, 1, 4, 2}, 1);
    EvalReport rep = evaluate(p, set, norm, "ann");
    for (const TrialMetrics& m : rep.rows) EXPECT_FALSE(m.r_defined);
    EXPECT_THROW(evaluate(p, RunSet{}, norm, "ann"), EmptyInput);
}

TEST(Evaluate, CellsAggregateMeanAndStd) {
    // two trials with known per-trial rmse: check the mean/std arithmetic
    SynthDatasetCfg cfg;
    cfg.runs_per_load = 1;
    cfg.trials_per_run = 3;
    cfg.traj.duration = 0.8;
    cfg.seed = 6;
    cfg.smooth.enabled = false;
    RunSet set = make_synthetic_dataset(test_model(), cfg);
    NormSpec norm = make_norm_spec(set, 4.0);
    MlpParams p = init(Architecture{5, 2, 6, 2}, 3);

    EvalReport rep = evaluate(p, set, norm, "pinn");
    for (const auto& [key, cell] : rep.cells) {
        std::vector<double> vals;
        for (const TrialMetrics& m : rep.rows)
            if (m.joint == key.first && m.load_kg == key.second) vals.push_back(m.rmse_norm);
        ASSERT_EQ(static_cast<int>(vals.size()), cell.n_trials);
        double mean = 0;
        for (double v : vals) mean += v;
        mean /= vals.size();
        double var = 0;
        for (double v : vals) var += (v - mean) * (v - mean);
        var /= vals.size();
        EXPECT_NEAR(cell.rmse_mean, mean, 1e-12);
        EXPECT_NEAR(cell.rmse_std, std::sqrt(var), 1e-12);
    }
}

TEST(Export, TracesAndReportFiles) {
    TempDir tmp;
    SynthDatasetCfg cfg;
    cfg.runs_per_load = 1;
    cfg.trials_per_run = 1;
    cfg.traj.duration = 0.8;
    cfg.seed = 8;
    cfg.smooth.enabled = false;
    RunSet set = make_synthetic_dataset(test_model(), cfg);
    NormSpec norm = make_norm_spec(set, 4.0);
    MlpParams p = init(Architecture{5, 2, 6, 2}, 5);

    const fs::path trace = tmp.path / "trace.csv";
    export_traces(p, set.runs[0].trials[0], norm, trace);
    std::ifstream f(trace);
    std::string header;
    std::getline(f, header);
    EXPECT_EQ(header, "t,q_shoulder_true,q_shoulder_pred,q_elbow_true,q_elbow_pred");
    int lines = 0;
    std::string line;
    while (std::getline(f, line))
        if (!line.empty()) ++lines;
    EXPECT_EQ(lines, set.runs[0].trials[0].samples());

    EvalReport rep = evaluate(p, set, norm, "pinn");
    const fs::path rpath = tmp.path / "report.csv";
    write_report_csv(rep, rpath);
    std::ifstream rf(rpath);
    std::string l1, l2;
    std::getline(rf, l1);
    std::getline(rf, l2);
    EXPECT_NE(l1.find("aggregation"), std::string::npos);
    EXPECT_EQ(l2, "model,joint,load_kg,rmse_mean,rmse_std,r_mean,r_std,n_trials");

    nlohmann::json j = report_to_json(rep);
    EXPECT_EQ(j.at("model").get<std::string>(), "pinn");
    EXPECT_EQ(j.at("cells").size(), rep.cells.size());
    EXPECT_EQ(j.at("trials").size(), rep.rows.size());

    EXPECT_THROW(export_traces(p, set.runs[0].trials[0], norm,
                               tmp.path / "no_such_dir" / "x.csv"),
                 IOError);
}

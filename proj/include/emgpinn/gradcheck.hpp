#pragma once

// Finite-difference verification of the reverse-mode gradients, primitive by
// primitive. Used by the gradcheck CLI command and by the test suites.

#include <Eigen/Dense>

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "emgpinn/autodiff.hpp"
#include "emgpinn/jet.hpp"
#include "emgpinn/network.hpp"
#include "emgpinn/training.hpp"

namespace emgpinn {

struct GradCheckResult {
    std::string primitive;
    double max_rel_err = 0.0;
    bool pass = false;
};

namespace detail {

// Relative error with a floor tied to the gradient's overall scale, so
// near-zero components do not produce spurious failures from FD roundoff.
inline double rel_err(const Eigen::VectorXd& analytic, const Eigen::VectorXd& fd) {
    const double scale = std::max({fd.cwiseAbs().maxCoeff(), analytic.cwiseAbs().maxCoeff(),
                                   1e-8});
    double worst = 0.0;
    for (Eigen::Index i = 0; i < analytic.size(); ++i) {
        const double denom =
            std::max({std::abs(analytic[i]), std::abs(fd[i]), 1e-3 * scale});
        worst = std::max(worst, std::abs(analytic[i] - fd[i]) / denom);
    }
    return worst;
}

} // namespace detail

// Central finite differences of a scalar function of the flat parameters.
inline Eigen::VectorXd finite_difference_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
    double h = 1e-5) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double orig = xp[i];
        xp[i] = orig + h;
        const double fp = f(xp);
        xp[i] = orig - h;
        const double fm = f(xp);
        xp[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// Runs one named check: builds the analytic gradient of the tape loss and
// compares against central finite differences over the flat parameters.
// `inject` perturbs the analytic gradient of the named primitive so the
// failure path is exercised end to end.
inline std::vector<GradCheckResult> run_gradcheck(std::uint64_t seed,
                                                  const std::string& inject = "",
                                                  double tol = 1e-4, double h = 1e-5) {
    Architecture arch;
    arch.input_dim = 5;
    arch.hidden_layers = 2;
    arch.hidden_width = 4;
    arch.output_dim = 2;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto rand_mat = [&](int r, int c) {
        Eigen::MatrixXd m(r, c);
        for (int i = 0; i < r; ++i)
            for (int jj = 0; jj < c; ++jj) m(i, jj) = u(rng);
        return m;
    };

    const Eigen::MatrixXd x = rand_mat(arch.input_dim, 3);

    using TapeLoss = std::function<ad::Var(ad::Tape&, const Architecture&, const TapeParams&)>;
    std::vector<std::pair<std::string, TapeLoss>> checks;

    auto first_layer = [x](ad::Tape& t, const Architecture&, const TapeParams& tp) {
        return t.add_colwise(t.matmul(tp.weights[0], t.leaf(x)), tp.biases[0]);
    };
    checks.emplace_back("affine", [first_layer](ad::Tape& t, const Architecture& a,
                                                const TapeParams& tp) {
        return t.sum_all(first_layer(t, a, tp));
    });
    checks.emplace_back("tanh", [first_layer](ad::Tape& t, const Architecture& a,
                                              const TapeParams& tp) {
        return t.sum_all(t.tanh(first_layer(t, a, tp)));
    });
    checks.emplace_back("sigmoid", [first_layer](ad::Tape& t, const Architecture& a,
                                                 const TapeParams& tp) {
        return t.sum_all(t.sigmoid(first_layer(t, a, tp)));
    });
    checks.emplace_back("square", [first_layer](ad::Tape& t, const Architecture& a,
                                                const TapeParams& tp) {
        return t.sum_all(t.square(first_layer(t, a, tp)));
    });
    checks.emplace_back("sin", [first_layer](ad::Tape& t, const Architecture& a,
                                             const TapeParams& tp) {
        return t.sum_all(t.sin(first_layer(t, a, tp)));
    });
    checks.emplace_back("cos", [first_layer](ad::Tape& t, const Architecture& a,
                                             const TapeParams& tp) {
        return t.sum_all(t.cos(first_layer(t, a, tp)));
    });

    const Eigen::MatrixXd target = rand_mat(arch.output_dim, 3);
    checks.emplace_back("mlp_mse", [x, target](ad::Tape& t, const Architecture& a,
                                               const TapeParams& tp) {
        ad::Var y = forward_tape(t, a, tp, t.leaf(x));
        return t.mul_const(t.sum_all(t.square(t.sub(y, t.leaf(target)))), 1.0 / 3.0);
    });

    // Physics term through the stencil jet and the dynamics expressions.
    LimbModel model{SegmentParams{2.0, 0.3, 0.45, 0.02}, SegmentParams{1.3, 0.27, 0.42, 0.01},
                    2.0, 9.81};
    SampleTable batch;
    batch.load_kg = 2.0;
    batch.emg = rand_mat(kEmgChannels, 3).cwiseAbs();
    batch.t_norm = Eigen::RowVectorXd::LinSpaced(3, 0.3, 0.7);
    batch.q_norm = rand_mat(2, 3).cwiseAbs() * 0.5;
    batch.tau = rand_mat(2, 3);
    batch.t_scale = Eigen::RowVectorXd::Constant(3, 1.6);
    NormSpec norm;
    norm.input_offset = Eigen::VectorXd::Zero(5);
    norm.input_scale = Eigen::VectorXd::Ones(5);
    norm.angle_offset = Eigen::Vector2d(0.1, 0.2);
    norm.angle_scale = Eigen::Vector2d(0.8, 1.5);
    const double tau_char = characteristic_torque(model);
    checks.emplace_back("dynamics_residual",
                        [batch, model, norm, tau_char](ad::Tape& t, const Architecture& a,
                                                       const TapeParams& tp) {
                            return physics_loss_tape(t, a, tp, batch, model, norm, tau_char);
                        });
    checks.emplace_back("time_jet", [batch](ad::Tape& t, const Architecture& a,
                                            const TapeParams& tp) {
        TapeTimeJet jet = time_jet_tape(t, a, tp, batch.emg, batch.t_norm);
        return t.sum_all(t.add(jet.dq, t.mul_const(jet.d2q, 1e-3)));
    });
    checks.emplace_back("total_loss",
                        [batch, model, norm, tau_char](ad::Tape& t, const Architecture& a,
                                                       const TapeParams& tp) {
                            TotalLoss tl = total_loss_tape(t, a, tp, batch, model, norm, 0.7,
                                                           tau_char);
                            return tl.root;
                        });

    MlpParams params = init(arch, seed + 1);
    const Eigen::VectorXd flat = params.flatten();

    std::vector<GradCheckResult> results;
    for (const auto& [name, fn] : checks) {
        // Losses that go through the second-derivative stencil amplify FD
        // roundoff by 1/stencil_h^2; a larger step keeps the comparison in
        // the truncation-dominated regime.
        const bool stencil_amplified = name == "dynamics_residual" ||
                                       name == "time_jet" || name == "total_loss";
        const double h_eff = stencil_amplified ? std::max(h, 1e-4) : h;
        Eigen::VectorXd analytic = grad(
            [&](ad::Tape& t, const TapeParams& tp) { return fn(t, arch, tp); }, params);
        if (name == inject) analytic.array() += 1e-2;

        auto eval_at = [&](const Eigen::VectorXd& p) {
            MlpParams pp = MlpParams::unflatten(arch, p);
            ad::Tape t;
            TapeParams tp = register_params(t, pp);
            return fn(t, arch, tp).scalar();
        };
        Eigen::VectorXd fd = finite_difference_gradient(eval_at, flat, h_eff);
        GradCheckResult r;
        r.primitive = name;
        r.max_rel_err = detail::rel_err(analytic, fd);
        r.pass = r.max_rel_err < tol;
        results.push_back(r);
    }
    return results;
}

} // namespace emgpinn

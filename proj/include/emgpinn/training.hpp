#pragma once

// Composite loss construction, Adam optimization with the step-decay
// schedule, and the sequential per-load training protocol: one block of
// epochs per load condition, shuffling within a block but never across loads.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "emgpinn/autodiff.hpp"
#include "emgpinn/data.hpp"
#include "emgpinn/dynamics.hpp"
#include "emgpinn/jet.hpp"
#include "emgpinn/network.hpp"

namespace emgpinn {

struct EmptyBatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct EmptyDataset : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class TrainMode { Pinn, Ann };

inline const char* to_string(TrainMode m) { return m == TrainMode::Pinn ? "pinn" : "ann"; }

struct TrainConfig {
    int batch_size = 75;
    int epochs_per_load = 1000;
    double lr0 = 3e-4;
    int lr_step = 300;
    double lr_gamma = 0.8;
    double alpha = -1.0; // < 0 means auto (first-batch ratio per load block)
    std::uint64_t seed = 0;
    std::vector<double> load_order{0.0, 2.0, 4.0};
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double stencil_h = kDefaultStencilH;

    bool alpha_auto() const { return alpha < 0.0; }

    void validate() const {
        if (batch_size < 1 || epochs_per_load < 1 || lr_step < 1)
            throw std::invalid_argument("TrainConfig: batch/epochs/step must be >= 1");
        if (!(lr0 > 0.0) || !(lr_gamma > 0.0 && lr_gamma <= 1.0))
            throw std::invalid_argument("TrainConfig: bad lr0/gamma");
        if (load_order.empty()) throw std::invalid_argument("TrainConfig: empty load order");
    }
};

struct LossBreakdown {
    double L_q = 0.0;
    double L_tau = 0.0;
    double alpha_used = 0.0;
    double J_total = 0.0;
};

// lr0 * gamma^floor(epoch/step); the schedule restarts with each load block.
inline double lr_at(const TrainConfig& cfg, int epoch_in_block) {
    if (epoch_in_block < 0) throw std::invalid_argument("lr_at: epoch must be >= 0");
    return cfg.lr0 * std::pow(cfg.lr_gamma, epoch_in_block / cfg.lr_step);
}

// --- Flattened per-load sample tables ---------------------------------------

// All samples of one load condition, ready for batching. Time is normalized
// per trial to [0,1]; targets are in normalized angle space.
struct SampleTable {
    double load_kg = 0.0;
    Eigen::MatrixXd emg;        // 4 x N
    Eigen::RowVectorXd t_norm;  // 1 x N
    Eigen::MatrixXd q_norm;     // 2 x N, normalized targets
    Eigen::MatrixXd tau;        // 2 x N, benchmark torque
    Eigen::RowVectorXd t_scale; // 1 x N, trial duration (s) per sample

    Eigen::Index size() const { return t_norm.size(); }

    SampleTable select(const std::vector<int>& idx) const {
        SampleTable out;
        out.load_kg = load_kg;
        const auto n = static_cast<Eigen::Index>(idx.size());
        out.emg.resize(emg.rows(), n);
        out.t_norm.resize(n);
        out.q_norm.resize(2, n);
        out.tau.resize(2, n);
        out.t_scale.resize(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            out.emg.col(j) = emg.col(idx[j]);
            out.t_norm[j] = t_norm[idx[j]];
            out.q_norm.col(j) = q_norm.col(idx[j]);
            out.tau.col(j) = tau.col(idx[j]);
            out.t_scale[j] = t_scale[idx[j]];
        }
        return out;
    }
};

// Builds the angle normalization from the reference load's min/max (falls
// back to the global min/max when that load is absent).
inline NormSpec make_norm_spec(const RunSet& set, double reference_load = 4.0) {
    Eigen::Vector2d lo(1e300, 1e300), hi(-1e300, -1e300);
    bool found_ref = false;
    for (int pass = 0; pass < 2 && !found_ref; ++pass) {
        const bool ref_only = (pass == 0);
        lo.setConstant(1e300);
        hi.setConstant(-1e300);
        for (const Run& r : set.runs) {
            if (ref_only && r.load_kg != reference_load) continue;
            for (const Trial& tr : r.trials) {
                for (int j = 0; j < 2; ++j) {
                    lo[j] = std::min(lo[j], tr.q.row(j).minCoeff());
                    hi[j] = std::max(hi[j], tr.q.row(j).maxCoeff());
                }
            }
            found_ref = true;
        }
        if (!ref_only) break;
    }
    if (hi[0] < lo[0]) throw EmptyDataset("make_norm_spec: empty run set");
    NormSpec spec;
    spec.angle_offset = lo;
    for (int j = 0; j < 2; ++j) spec.angle_scale[j] = std::max(hi[j] - lo[j], 1e-9);
    spec.input_offset = Eigen::VectorXd::Zero(5);
    spec.input_scale = Eigen::VectorXd::Ones(5);
    return spec;
}

inline SampleTable build_table(const RunSet& set, double load, const NormSpec& norm) {
    std::vector<const Trial*> trials;
    for (const Run& r : set.runs)
        if (r.load_kg == load)
            for (const Trial& t : r.trials) trials.push_back(&t);
    if (trials.empty()) throw EmptyDataset("build_table: no trials for load");

    Eigen::Index total = 0;
    for (const Trial* t : trials) {
        if (!t->has_derived)
            throw EmptyDataset("build_table: trial lacks benchmark torque columns");
        total += t->samples();
    }
    SampleTable tab;
    tab.load_kg = load;
    tab.emg.resize(kEmgChannels, total);
    tab.t_norm.resize(total);
    tab.q_norm.resize(2, total);
    tab.tau.resize(2, total);
    tab.t_scale.resize(total);
    Eigen::Index k = 0;
    for (const Trial* t : trials) {
        const double dur = std::max(t->duration(), 1e-9);
        for (Eigen::Index i = 0; i < t->samples(); ++i, ++k) {
            tab.emg.col(k) = t->emg.col(i);
            tab.t_norm[k] = (t->t[i] - t->t[0]) / dur;
            tab.q_norm.col(k) = norm.normalize_angles(t->q.col(i));
            tab.tau.col(k) = t->tau.col(i);
            tab.t_scale[k] = dur;
        }
    }
    return tab;
}

// Characteristic torque used to nondimensionalize the physics residual:
// the peak gravity torque of the loaded model.
inline double characteristic_torque(const LimbModel& model) {
    const DynCoeffs c = dyn_coeffs(model);
    return std::max(c.g * (c.m1lc1 + c.m2L * c.l1 + c.b2), 1e-9);
}

// --- Losses -------------------------------------------------------------------

// (1/N) sum_r ||qhat_r - q_r||^2 in normalized angle space, on the tape.
inline ad::Var data_loss_tape(ad::Tape& tape, const Architecture& arch, const TapeParams& tp,
                              const SampleTable& batch) {
    if (batch.size() == 0) throw EmptyBatch("data_loss: empty batch");
    Eigen::MatrixXd x(arch.input_dim, batch.size());
    x.topRows(kEmgChannels) = batch.emg;
    x.row(arch.input_dim - 1) = batch.t_norm;
    ad::Var yhat = forward_tape(tape, arch, tp, tape.leaf(x));
    ad::Var diff = tape.sub(yhat, tape.leaf(batch.q_norm));
    return tape.mul_const(tape.sum_all(tape.square(diff)),
                          1.0 / static_cast<double>(batch.size()));
}

inline double data_loss(const MlpParams& params, const SampleTable& batch) {
    if (batch.size() == 0) throw EmptyBatch("data_loss: empty batch");
    Eigen::MatrixXd x(params.arch.input_dim, batch.size());
    x.topRows(kEmgChannels) = batch.emg;
    x.row(params.arch.input_dim - 1) = batch.t_norm;
    Eigen::MatrixXd yhat = forward(params, x);
    return (yhat - batch.q_norm).squaredNorm() / static_cast<double>(batch.size());
}

// Physics residual for one sample jet in physical units:
// f = I(q) qdd + C(q, qd) + G(q) - tau_ref.
inline Vec2<double> physics_residual(const LimbModel& model, const Vec2<double>& q,
                                     const Vec2<double>& qd, const Vec2<double>& qdd,
                                     const Torque2& tau_ref) {
    const Vec2<double> f = inverse_dynamics_t(dyn_coeffs(model), q, qd, qdd);
    return {f[0] - tau_ref.tau[0], f[1] - tau_ref.tau[1]};
}

// (1/N) sum_r ||f_r / tau_char||^2 on the tape, with time derivatives taken
// through the stencil jet and converted from normalized trial time to
// seconds via the per-sample trial duration.
inline ad::Var physics_loss_tape(ad::Tape& tape, const Architecture& arch,
                                 const TapeParams& tp, const SampleTable& batch,
                                 const LimbModel& model, const NormSpec& norm,
                                 double tau_char, double h = kDefaultStencilH) {
    if (batch.size() == 0) throw EmptyBatch("physics_loss: empty batch");
    const auto n = batch.size();
    TapeTimeJet jet = time_jet_tape(tape, arch, tp, batch.emg, batch.t_norm, h);

    // Per-sample conversion factors from normalized time to seconds.
    Eigen::RowVectorXd inv_t = batch.t_scale.cwiseInverse();
    Eigen::RowVectorXd inv_t2 = inv_t.cwiseProduct(inv_t);
    ad::Var inv_t_v = tape.leaf(inv_t);
    ad::Var inv_t2_v = tape.leaf(inv_t2);

    auto joint = [&](ad::Var m, int j) { return tape.slice_rows(m, j, 1); };

    const DynCoeffs dc = dyn_coeffs(model.with_load(batch.load_kg));
    ad::Var q0_0 = joint(jet.q, 0), q0_1 = joint(jet.q, 1);
    ad::Var dq_0 = tape.mul(joint(jet.dq, 0), inv_t_v);
    ad::Var dq_1 = tape.mul(joint(jet.dq, 1), inv_t_v);
    ad::Var d2q_0 = tape.mul(joint(jet.d2q, 0), inv_t2_v);
    ad::Var d2q_1 = tape.mul(joint(jet.d2q, 1), inv_t2_v);

    Vec2<ad::Var> q{q0_0 * norm.angle_scale[0] + norm.angle_offset[0],
                    q0_1 * norm.angle_scale[1] + norm.angle_offset[1]};
    Vec2<ad::Var> qd{dq_0 * norm.angle_scale[0], dq_1 * norm.angle_scale[1]};
    Vec2<ad::Var> qdd{d2q_0 * norm.angle_scale[0], d2q_1 * norm.angle_scale[1]};
    Vec2<ad::Var> f = inverse_dynamics_t(dc, q, qd, qdd);
    ad::Var f0 = tape.sub(f[0], tape.leaf(batch.tau.row(0)));
    ad::Var f1 = tape.sub(f[1], tape.leaf(batch.tau.row(1)));
    const double s = 1.0 / tau_char;
    ad::Var sq = tape.add(tape.square(tape.mul_const(f0, s)),
                          tape.square(tape.mul_const(f1, s)));
    return tape.mul_const(tape.sum_all(sq), 1.0 / static_cast<double>(n));
}

// Plain-double physics loss for validation.
inline double physics_loss(const MlpParams& params, const SampleTable& batch,
                           const LimbModel& model, const NormSpec& norm, double tau_char,
                           double h = kDefaultStencilH) {
    if (batch.size() == 0) throw EmptyBatch("physics_loss: empty batch");
    BatchJet jet = batch_jet(params, batch.emg, batch.t_norm, h);
    const DynCoeffs dc = dyn_coeffs(model.with_load(batch.load_kg));

    double acc = 0.0;
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
        const double inv_t = 1.0 / batch.t_scale[i];
        Vec2<double> q{jet.q(0, i) * norm.angle_scale[0] + norm.angle_offset[0],
                       jet.q(1, i) * norm.angle_scale[1] + norm.angle_offset[1]};
        Vec2<double> qd{jet.dq(0, i) * inv_t * norm.angle_scale[0],
                        jet.dq(1, i) * inv_t * norm.angle_scale[1]};
        Vec2<double> qdd{jet.d2q(0, i) * inv_t * inv_t * norm.angle_scale[0],
                         jet.d2q(1, i) * inv_t * inv_t * norm.angle_scale[1]};
        Vec2<double> f = inverse_dynamics_t(dc, q, qd, qdd);
        const double r0 = (f[0] - batch.tau(0, i)) / tau_char;
        const double r1 = (f[1] - batch.tau(1, i)) / tau_char;
        acc += r0 * r0 + r1 * r1;
    }
    return acc / static_cast<double>(batch.size());
}

// J = L_q + alpha * L_tau. Returns the breakdown plus the tape root.
struct TotalLoss {
    LossBreakdown breakdown;
    ad::Var root;
};

inline TotalLoss total_loss_tape(ad::Tape& tape, const Architecture& arch,
                                 const TapeParams& tp, const SampleTable& batch,
                                 const LimbModel& model, const NormSpec& norm,
                                 double alpha, double tau_char,
                                 double h = kDefaultStencilH) {
    ad::Var lq = data_loss_tape(tape, arch, tp, batch);
    TotalLoss out;
    out.breakdown.L_q = lq.scalar();
    out.breakdown.alpha_used = alpha;
    if (alpha != 0.0) {
        ad::Var lt = physics_loss_tape(tape, arch, tp, batch, model, norm, tau_char, h);
        out.breakdown.L_tau = lt.scalar();
        out.root = tape.add(lq, tape.mul_const(lt, alpha));
    } else {
        out.breakdown.L_tau = 0.0;
        out.root = lq;
    }
    out.breakdown.J_total = out.breakdown.L_q + alpha * out.breakdown.L_tau;
    return out;
}

// --- Adam ----------------------------------------------------------------------

struct OptimizerState {
    Eigen::VectorXd m, v;
    long step = 0;

    static OptimizerState zeros(int n) {
        return OptimizerState{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0};
    }
};

inline std::pair<OptimizerState, Eigen::VectorXd>
adam_step(OptimizerState state, const Eigen::VectorXd& params, const Eigen::VectorXd& grad,
          double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    if (params.size() != grad.size() || params.size() != state.m.size())
        throw ShapeMismatch("adam_step: size mismatch");
    state.step += 1;
    state.m = beta1 * state.m + (1.0 - beta1) * grad;
    state.v = beta2 * state.v + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    Eigen::ArrayXd mhat = state.m.array() / bc1;
    Eigen::ArrayXd vhat = state.v.array() / bc2;
    Eigen::VectorXd out = params.array() - lr * mhat / (vhat.sqrt() + eps);
    return {std::move(state), std::move(out)};
}

// --- Training loop ---------------------------------------------------------------

struct EpochRecord {
    int epoch = 0;       // global epoch index
    double load_kg = 0;
    double lr = 0;
    double L_q = 0;      // mean over batches
    double L_tau = 0;
    double alpha = 0;
    double J = 0;
    double val_J = 0;
};

struct TrainResult {
    MlpParams final_params;
    MlpParams best_params; // best validation loss
    double best_val = 0.0;
    std::vector<EpochRecord> history;
    std::string time_derivative = "stencil"; // reported in the training log
};

inline TrainResult train(const DatasetSplit& data, const LimbModel& model,
                         const TrainConfig& cfg, TrainMode mode,
                         const Architecture& arch = {}, const NormSpec* norm_in = nullptr) {
    cfg.validate();
    if (data.train.runs.empty()) throw EmptyDataset("train: empty training set");
    NormSpec norm = norm_in ? *norm_in : make_norm_spec(data.train);

    MlpParams params = init(arch, cfg.seed);
    Eigen::VectorXd flat = params.flatten();
    OptimizerState opt = OptimizerState::zeros(static_cast<int>(flat.size()));

    TrainResult result;
    result.best_val = std::numeric_limits<double>::infinity();

    int global_epoch = 0;
    for (std::size_t bi = 0; bi < cfg.load_order.size(); ++bi) {
        const double load = cfg.load_order[bi];
        SampleTable table = build_table(data.train, load, norm);
        SampleTable val_table = build_table(data.val, load, norm);
        const double tau_char = characteristic_torque(model.with_load(load));

        // Resolve alpha for this block.
        double alpha = 0.0;
        if (mode == TrainMode::Pinn) {
            if (cfg.alpha_auto()) {
                std::vector<int> head(std::min<Eigen::Index>(cfg.batch_size, table.size()));
                std::iota(head.begin(), head.end(), 0);
                SampleTable first = table.select(head);
                const double lq0 = data_loss(params, first);
                const double lt0 =
                    physics_loss(params, first, model, norm, tau_char, cfg.stencil_h);
                alpha = lt0 > 0.0 ? lq0 / lt0 : 1.0;
            } else {
                alpha = cfg.alpha;
            }
        }

        std::mt19937_64 shuffle_rng(cfg.seed ^ (0xa5a5a5a5ULL + bi));
        std::vector<int> order(table.size());
        std::iota(order.begin(), order.end(), 0);

        for (int epoch = 0; epoch < cfg.epochs_per_load; ++epoch, ++global_epoch) {
            const double lr = lr_at(cfg, epoch);
            std::shuffle(order.begin(), order.end(), shuffle_rng);

            double sum_lq = 0, sum_lt = 0, sum_j = 0;
            int n_batches = 0;
            for (Eigen::Index start = 0; start < table.size(); start += cfg.batch_size) {
                const Eigen::Index len = std::min<Eigen::Index>(cfg.batch_size,
                                                                table.size() - start);
                std::vector<int> idx(order.begin() + start, order.begin() + start + len);
                SampleTable batch = table.select(idx);

                ad::Tape tape;
                TapeParams tp = register_params(tape, params);
                TotalLoss tl =
                    total_loss_tape(tape, arch, tp, batch, model, norm, alpha, tau_char,
                                    cfg.stencil_h);
                std::vector<Eigen::MatrixXd> adj;
                try {
                    adj = tape.backward(tl.root);
                } catch (const ad::NonFiniteLoss&) {
                    throw ad::NonFiniteLoss("non-finite loss at epoch " +
                                            std::to_string(global_epoch));
                }
                Eigen::VectorXd g = collect_gradient(arch, tp, adj);
                std::tie(opt, flat) = adam_step(opt, flat, g, lr, cfg.adam_beta1,
                                                cfg.adam_beta2, cfg.adam_eps);
                params = MlpParams::unflatten(arch, flat);

                sum_lq += tl.breakdown.L_q;
                sum_lt += tl.breakdown.L_tau;
                sum_j += tl.breakdown.J_total;
                ++n_batches;
            }

            double val_j = data_loss(params, val_table);
            if (mode == TrainMode::Pinn && alpha != 0.0)
                val_j += alpha *
                         physics_loss(params, val_table, model, norm, tau_char, cfg.stencil_h);

            EpochRecord rec;
            rec.epoch = global_epoch;
            rec.load_kg = load;
            rec.lr = lr;
            rec.L_q = sum_lq / n_batches;
            rec.L_tau = sum_lt / n_batches;
            rec.alpha = alpha;
            rec.J = sum_j / n_batches;
            rec.val_J = val_j;
            result.history.push_back(rec);

            if (val_j < result.best_val) {
                result.best_val = val_j;
                result.best_params = params;
            }
        }
    }
    result.final_params = params;
    if (result.best_params.weights.empty()) result.best_params = params;
    return result;
}

} // namespace emgpinn

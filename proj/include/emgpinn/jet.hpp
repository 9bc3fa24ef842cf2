#pragma once

// First and second time-derivatives of the network outputs at fixed EMG
// input, with parameter gradients flowing through them.
//
// The derivatives are taken with a 3-point central stencil over the time
// input, embedded in the tape: the network is evaluated at t-h, t, t+h and
// the stencil combinations live on the graph, so backward() computes the
// exact gradient of the stencil approximation. The active option and h are
// reported in the training log.

#include <Eigen/Dense>

#include "emgpinn/autodiff.hpp"
#include "emgpinn/network.hpp"

namespace emgpinn {

// Default stencil step in normalized trial time: a quarter of one 125 Hz
// sample period.
inline constexpr double kDefaultStencilH = 1.0 / (125.0 * 4.0);

struct TimeJet {
    Eigen::Vector2d q;    // network output at t
    Eigen::Vector2d dq;   // d output / dt
    Eigen::Vector2d d2q;  // d^2 output / dt^2
};

struct TapeTimeJet {
    ad::Var q;   // output_dim x N
    ad::Var dq;
    ad::Var d2q;
};

// Batched tape version. emg is (input_dim-1) x N, t is 1 x N of normalized
// trial times. The three stencil evaluations share one forward pass over a
// horizontally concatenated input block.
inline TapeTimeJet time_jet_tape(ad::Tape& tape, const Architecture& arch,
                                 const TapeParams& tp, const Eigen::MatrixXd& emg,
                                 const Eigen::RowVectorXd& t, double h = kDefaultStencilH) {
    const int n = static_cast<int>(t.size());
    if (emg.rows() != arch.input_dim - 1 || emg.cols() != n)
        throw ShapeMismatch("time_jet_tape: emg block shape mismatch");

    Eigen::MatrixXd x(arch.input_dim, 3 * n);
    for (int s = 0; s < 3; ++s) {
        const double dt = (s - 1) * h;
        x.block(0, s * n, arch.input_dim - 1, n) = emg;
        x.block(arch.input_dim - 1, s * n, 1, n) = t.array() + dt;
    }
    ad::Var y = forward_tape(tape, arch, tp, tape.leaf(x));
    ad::Var ym = tape.slice_cols(y, 0, n);
    ad::Var y0 = tape.slice_cols(y, n, n);
    ad::Var yp = tape.slice_cols(y, 2 * n, n);

    TapeTimeJet jet;
    jet.q = y0;
    jet.dq = tape.mul_const(tape.sub(yp, ym), 1.0 / (2.0 * h));
    jet.d2q = tape.mul_const(tape.sub(tape.add(yp, ym), tape.mul_const(y0, 2.0)),
                             1.0 / (h * h));
    return jet;
}

// Plain-double version for inference-time use (validation loss, evaluation).
inline TimeJet time_jet(const MlpParams& params, const Eigen::VectorXd& emg, double t,
                        double h = kDefaultStencilH) {
    const int d = params.arch.input_dim;
    if (emg.size() != d - 1) throw ShapeMismatch("time_jet: emg size mismatch");
    Eigen::MatrixXd x(d, 3);
    for (int s = 0; s < 3; ++s) {
        x.block(0, s, d - 1, 1) = emg;
        x(d - 1, s) = t + (s - 1) * h;
    }
    Eigen::MatrixXd y = forward(params, x);
    TimeJet jet;
    jet.q = y.col(1);
    jet.dq = (y.col(2) - y.col(0)) / (2.0 * h);
    jet.d2q = (y.col(2) + y.col(0) - 2.0 * y.col(1)) / (h * h);
    return jet;
}

// Batched plain-double stencil jet; returns (q, dq, d2q) each out_dim x N.
struct BatchJet {
    Eigen::MatrixXd q, dq, d2q;
};

inline BatchJet batch_jet(const MlpParams& params, const Eigen::MatrixXd& emg,
                          const Eigen::RowVectorXd& t, double h = kDefaultStencilH) {
    const int d = params.arch.input_dim;
    const int n = static_cast<int>(t.size());
    Eigen::MatrixXd x(d, 3 * n);
    for (int s = 0; s < 3; ++s) {
        x.block(0, s * n, d - 1, n) = emg;
        x.block(d - 1, s * n, 1, n) = t.array() + (s - 1) * h;
    }
    Eigen::MatrixXd y = forward(params, x);
    BatchJet jet;
    jet.q = y.middleCols(n, n);
    jet.dq = (y.middleCols(2 * n, n) - y.middleCols(0, n)) / (2.0 * h);
    jet.d2q = (y.middleCols(2 * n, n) + y.middleCols(0, n) - 2.0 * y.middleCols(n, n)) /
              (h * h);
    return jet;
}

} // namespace emgpinn

#pragma once

// Feed-forward MLP mapping (EMG channels, normalized time) to normalized
// joint angles in (0,1): tanh hidden layers, sigmoid output.

#include <Eigen/Dense>

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "emgpinn/autodiff.hpp"

namespace emgpinn {

struct ShapeMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct Architecture {
    int input_dim = 5;    // 4 EMG channels + time
    int hidden_layers = 4;
    int hidden_width = 75;
    int output_dim = 2;   // shoulder, elbow

    void validate() const {
        if (input_dim < 1 || hidden_layers < 1 || hidden_width < 1 || output_dim < 1)
            throw std::invalid_argument("Architecture: all dims must be >= 1");
    }

    // Width of layer i's input, i = 0..hidden_layers (output layer last).
    int layer_in(int i) const { return i == 0 ? input_dim : hidden_width; }
    int layer_out(int i) const { return i == hidden_layers ? output_dim : hidden_width; }
    int n_layers() const { return hidden_layers + 1; }

    int param_count() const {
        int n = 0;
        for (int i = 0; i < n_layers(); ++i) n += layer_out(i) * (layer_in(i) + 1);
        return n;
    }
};

struct MlpParams {
    Architecture arch;
    std::vector<Eigen::MatrixXd> weights; // weights[i]: layer_out(i) x layer_in(i)
    std::vector<Eigen::VectorXd> biases;  // biases[i]: layer_out(i)

    void validate() const {
        arch.validate();
        if (static_cast<int>(weights.size()) != arch.n_layers() ||
            static_cast<int>(biases.size()) != arch.n_layers())
            throw ShapeMismatch("MlpParams: wrong layer count");
        for (int i = 0; i < arch.n_layers(); ++i) {
            if (weights[i].rows() != arch.layer_out(i) || weights[i].cols() != arch.layer_in(i))
                throw ShapeMismatch("MlpParams: weight shape mismatch at layer " +
                                    std::to_string(i));
            if (biases[i].size() != arch.layer_out(i))
                throw ShapeMismatch("MlpParams: bias shape mismatch at layer " +
                                    std::to_string(i));
        }
    }

    // Canonical flat ordering: layer-major, weights before biases,
    // row-major within each weight matrix.
    Eigen::VectorXd flatten() const {
        Eigen::VectorXd out(arch.param_count());
        int k = 0;
        for (int i = 0; i < arch.n_layers(); ++i) {
            for (int r = 0; r < weights[i].rows(); ++r)
                for (int c = 0; c < weights[i].cols(); ++c) out[k++] = weights[i](r, c);
            for (int r = 0; r < biases[i].size(); ++r) out[k++] = biases[i][r];
        }
        return out;
    }

    static MlpParams unflatten(const Architecture& arch, const Eigen::VectorXd& flat) {
        if (flat.size() != arch.param_count())
            throw ShapeMismatch("unflatten: wrong flat length");
        MlpParams p;
        p.arch = arch;
        int k = 0;
        for (int i = 0; i < arch.n_layers(); ++i) {
            Eigen::MatrixXd w(arch.layer_out(i), arch.layer_in(i));
            for (int r = 0; r < w.rows(); ++r)
                for (int c = 0; c < w.cols(); ++c) w(r, c) = flat[k++];
            Eigen::VectorXd b(arch.layer_out(i));
            for (int r = 0; r < b.size(); ++r) b[r] = flat[k++];
            p.weights.push_back(std::move(w));
            p.biases.push_back(std::move(b));
        }
        return p;
    }
};

// Glorot-uniform weights, zero biases, fully determined by the seed.
inline MlpParams init(const Architecture& arch, std::uint64_t seed) {
    arch.validate();
    std::mt19937_64 rng(seed);
    MlpParams p;
    p.arch = arch;
    for (int i = 0; i < arch.n_layers(); ++i) {
        const int n_in = arch.layer_in(i), n_out = arch.layer_out(i);
        const double limit = std::sqrt(6.0 / (n_in + n_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        Eigen::MatrixXd w(n_out, n_in);
        for (int r = 0; r < n_out; ++r)
            for (int c = 0; c < n_in; ++c) w(r, c) = dist(rng);
        p.weights.push_back(std::move(w));
        p.biases.push_back(Eigen::VectorXd::Zero(n_out));
    }
    return p;
}

// Batched forward pass: x is input_dim x N, returns output_dim x N in (0,1).
inline Eigen::MatrixXd forward(const MlpParams& p, const Eigen::MatrixXd& x) {
    if (x.rows() != p.arch.input_dim)
        throw ShapeMismatch("forward: input has " + std::to_string(x.rows()) +
                            " rows, expected " + std::to_string(p.arch.input_dim));
    if (!x.allFinite()) throw std::invalid_argument("forward: non-finite input");
    Eigen::MatrixXd a = x;
    for (int i = 0; i < p.arch.hidden_layers; ++i)
        a = ((p.weights[i] * a).colwise() + p.biases[i]).array().tanh().matrix();
    Eigen::MatrixXd z = (p.weights.back() * a).colwise() + p.biases.back();
    return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

inline Eigen::VectorXd forward(const MlpParams& p, const Eigen::VectorXd& x) {
    return forward(p, Eigen::MatrixXd(x));
}

// Parameter leaves registered on a tape, so gradients can be read back in
// canonical order after a backward pass.
struct TapeParams {
    std::vector<ad::Var> weights;
    std::vector<ad::Var> biases;
};

inline TapeParams register_params(ad::Tape& tape, const MlpParams& p) {
    TapeParams tp;
    for (std::size_t i = 0; i < p.weights.size(); ++i) {
        tp.weights.push_back(tape.leaf(p.weights[i]));
        tp.biases.push_back(tape.leaf(p.biases[i]));
    }
    return tp;
}

inline ad::Var forward_tape(ad::Tape& tape, const Architecture& arch, const TapeParams& tp,
                            ad::Var x) {
    ad::Var a = x;
    for (int i = 0; i < arch.hidden_layers; ++i)
        a = tape.tanh(tape.add_colwise(tape.matmul(tp.weights[i], a), tp.biases[i]));
    return tape.sigmoid(
        tape.add_colwise(tape.matmul(tp.weights.back(), a), tp.biases.back()));
}

// Collects the adjoints of the parameter leaves into the canonical flat
// ordering (matching MlpParams::flatten).
inline Eigen::VectorXd collect_gradient(const Architecture& arch, const TapeParams& tp,
                                        const std::vector<Eigen::MatrixXd>& adj) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(arch.param_count());
    int k = 0;
    for (int i = 0; i < arch.n_layers(); ++i) {
        const Eigen::MatrixXd* wa =
            adj[tp.weights[i].index()].size() ? &adj[tp.weights[i].index()] : nullptr;
        for (int r = 0; r < arch.layer_out(i); ++r)
            for (int c = 0; c < arch.layer_in(i); ++c) g[k++] = wa ? (*wa)(r, c) : 0.0;
        const Eigen::MatrixXd* ba =
            adj[tp.biases[i].index()].size() ? &adj[tp.biases[i].index()] : nullptr;
        for (int r = 0; r < arch.layer_out(i); ++r) g[k++] = ba ? (*ba)(r, 0) : 0.0;
    }
    return g;
}

// Exact reverse-mode gradient of a scalar tape expression built by fn.
template <typename LossFn>
Eigen::VectorXd grad(const LossFn& fn, const MlpParams& params) {
    ad::Tape tape;
    TapeParams tp = register_params(tape, params);
    ad::Var loss = fn(tape, tp);
    auto adj = tape.backward(loss);
    return collect_gradient(params.arch, tp, adj);
}

// Affine maps between physical units and the network's normalized ranges.
// normalized = (physical - offset) / scale.
struct NormSpec {
    Eigen::VectorXd input_offset;  // per input channel
    Eigen::VectorXd input_scale;
    Eigen::Vector2d angle_offset{0.0, 0.0}; // rad
    Eigen::Vector2d angle_scale{1.0, 1.0};  // rad per unit

    void validate() const {
        if ((input_scale.array() <= 0.0).any() || (angle_scale.array() <= 0.0).any())
            throw std::invalid_argument("NormSpec: scales must be > 0");
    }

    Eigen::Vector2d normalize_angles(const Eigen::Vector2d& q) const {
        return ((q - angle_offset).array() / angle_scale.array()).matrix();
    }
    Eigen::Vector2d denormalize_angles(const Eigen::Vector2d& y) const {
        return (y.array() * angle_scale.array()).matrix() + angle_offset;
    }
};

inline Eigen::Vector2d denormalize(const Eigen::Vector2d& y, const NormSpec& spec) {
    spec.validate();
    return spec.denormalize_angles(y);
}

} // namespace emgpinn

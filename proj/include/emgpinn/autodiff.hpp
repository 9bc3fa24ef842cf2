#pragma once

// Reverse-mode automatic differentiation on a tape of dense matrix nodes.
// Scalars are 1x1 nodes, batched sample quantities are row vectors, and the
// network layers are full matrices, so one backward pass covers both the
// parameter gradients and the physics terms built from elementwise ops.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace emgpinn::ad {

struct NonFiniteLoss : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Op : std::uint8_t {
    Leaf,
    MatMul,      // a * b
    AddColwise,  // a + b (b is column, broadcast over columns)
    Add,         // a + b elementwise, same shape
    Sub,         // a - b elementwise
    Mul,         // a .* b elementwise
    AddConst,    // a + k
    MulConst,    // a * k
    Tanh,
    Sigmoid,
    Sin,
    Cos,
    Square,
    Neg,
    SumAll,      // 1x1 sum of all entries
    SliceCols,   // a.middleCols(k, cols)
    SliceRows,   // a.middleRows(k, rows)
};

class Tape;

// Lightweight handle to a tape node. Copyable; all state lives on the tape.
class Var {
  public:
    Var() = default;
    Var(Tape* tape, int idx) : tape_(tape), idx_(idx) {}

    const Eigen::MatrixXd& value() const;
    double scalar() const { return value()(0, 0); }
    Tape* tape() const { return tape_; }
    int index() const { return idx_; }
    bool valid() const { return tape_ != nullptr; }

  private:
    Tape* tape_ = nullptr;
    int idx_ = -1;
};

class Tape {
  public:
    struct Node {
        Eigen::MatrixXd value;
        Op op = Op::Leaf;
        int a = -1, b = -1;
        double k = 0.0; // constant for AddConst/MulConst, col offset for SliceCols
    };

    Var leaf(Eigen::MatrixXd value) {
        nodes_.push_back(Node{std::move(value), Op::Leaf, -1, -1, 0.0});
        return Var(this, static_cast<int>(nodes_.size()) - 1);
    }

    Var constant(double v) { return leaf(Eigen::MatrixXd::Constant(1, 1, v)); }

    Var matmul(Var a, Var b) {
        return push(Op::MatMul, a, b, val(a) * val(b));
    }
    Var add_colwise(Var a, Var b) {
        return push(Op::AddColwise, a, b, val(a).colwise() + Eigen::VectorXd(val(b)));
    }
    Var add(Var a, Var b) { return push(Op::Add, a, b, val(a) + val(b)); }
    Var sub(Var a, Var b) { return push(Op::Sub, a, b, val(a) - val(b)); }
    Var mul(Var a, Var b) {
        return push(Op::Mul, a, b, (val(a).array() * val(b).array()).matrix());
    }
    Var add_const(Var a, double k) {
        Var v = push(Op::AddConst, a, Var(), (val(a).array() + k).matrix());
        nodes_.back().k = k;
        return v;
    }
    Var mul_const(Var a, double k) {
        Var v = push(Op::MulConst, a, Var(), val(a) * k);
        nodes_.back().k = k;
        return v;
    }
    Var tanh(Var a) { return push(Op::Tanh, a, Var(), val(a).array().tanh().matrix()); }
    Var sigmoid(Var a) {
        return push(Op::Sigmoid, a, Var(),
                    (1.0 / (1.0 + (-val(a).array()).exp())).matrix());
    }
    Var sin(Var a) { return push(Op::Sin, a, Var(), val(a).array().sin().matrix()); }
    Var cos(Var a) { return push(Op::Cos, a, Var(), val(a).array().cos().matrix()); }
    Var square(Var a) { return push(Op::Square, a, Var(), val(a).array().square().matrix()); }
    Var neg(Var a) { return push(Op::Neg, a, Var(), -val(a)); }
    Var sum_all(Var a) {
        return push(Op::SumAll, a, Var(), Eigen::MatrixXd::Constant(1, 1, val(a).sum()));
    }
    Var slice_cols(Var a, int start, int cols) {
        Var v = push(Op::SliceCols, a, Var(), val(a).middleCols(start, cols));
        nodes_.back().k = static_cast<double>(start);
        return v;
    }
    Var slice_rows(Var a, int start, int rows) {
        Var v = push(Op::SliceRows, a, Var(), val(a).middleRows(start, rows));
        nodes_.back().k = static_cast<double>(start);
        return v;
    }

    const Eigen::MatrixXd& value(int idx) const { return nodes_[idx].value; }
    std::size_t size() const { return nodes_.size(); }

    // Reverse pass from a scalar root. Returns adjoints for every node; the
    // caller reads the entries for its parameter leaves.
    std::vector<Eigen::MatrixXd> backward(Var root) const {
        const Eigen::MatrixXd& rv = nodes_[root.index()].value;
        if (rv.size() != 1)
            throw std::logic_error("backward: root must be scalar");
        if (!std::isfinite(rv(0, 0)))
            throw NonFiniteLoss("loss evaluated to a non-finite value");

        std::vector<Eigen::MatrixXd> adj(nodes_.size());
        std::vector<bool> live(nodes_.size(), false);
        auto accum = [&](int idx, const Eigen::MatrixXd& g) {
            if (!live[idx]) {
                adj[idx] = g;
                live[idx] = true;
            } else {
                adj[idx] += g;
            }
        };
        accum(root.index(), Eigen::MatrixXd::Constant(1, 1, 1.0));

        for (int i = root.index(); i >= 0; --i) {
            if (!live[i]) continue;
            const Node& n = nodes_[i];
            const Eigen::MatrixXd& g = adj[i];
            switch (n.op) {
                case Op::Leaf:
                    break;
                case Op::MatMul:
                    accum(n.a, g * nodes_[n.b].value.transpose());
                    accum(n.b, nodes_[n.a].value.transpose() * g);
                    break;
                case Op::AddColwise:
                    accum(n.a, g);
                    accum(n.b, g.rowwise().sum());
                    break;
                case Op::Add:
                    accum(n.a, g);
                    accum(n.b, g);
                    break;
                case Op::Sub:
                    accum(n.a, g);
                    accum(n.b, -g);
                    break;
                case Op::Mul:
                    accum(n.a, (g.array() * nodes_[n.b].value.array()).matrix());
                    accum(n.b, (g.array() * nodes_[n.a].value.array()).matrix());
                    break;
                case Op::AddConst:
                    accum(n.a, g);
                    break;
                case Op::MulConst:
                    accum(n.a, g * n.k);
                    break;
                case Op::Tanh:
                    accum(n.a, (g.array() * (1.0 - n.value.array().square())).matrix());
                    break;
                case Op::Sigmoid:
                    accum(n.a,
                          (g.array() * n.value.array() * (1.0 - n.value.array())).matrix());
                    break;
                case Op::Sin:
                    accum(n.a, (g.array() * nodes_[n.a].value.array().cos()).matrix());
                    break;
                case Op::Cos:
                    accum(n.a, (-g.array() * nodes_[n.a].value.array().sin()).matrix());
                    break;
                case Op::Square:
                    accum(n.a, (2.0 * g.array() * nodes_[n.a].value.array()).matrix());
                    break;
                case Op::Neg:
                    accum(n.a, -g);
                    break;
                case Op::SumAll:
                    accum(n.a, Eigen::MatrixXd::Constant(nodes_[n.a].value.rows(),
                                                         nodes_[n.a].value.cols(), g(0, 0)));
                    break;
                case Op::SliceCols: {
                    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(nodes_[n.a].value.rows(),
                                                                 nodes_[n.a].value.cols());
                    full.middleCols(static_cast<int>(n.k), n.value.cols()) = g;
                    accum(n.a, full);
                    break;
                }
                case Op::SliceRows: {
                    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(nodes_[n.a].value.rows(),
                                                                 nodes_[n.a].value.cols());
                    full.middleRows(static_cast<int>(n.k), n.value.rows()) = g;
                    accum(n.a, full);
                    break;
                }
            }
        }
        return adj;
    }

  private:
    Var push(Op op, Var a, Var b, Eigen::MatrixXd value) {
        nodes_.push_back(Node{std::move(value), op, a.index(), b.index(), 0.0});
        return Var(this, static_cast<int>(nodes_.size()) - 1);
    }
    const Eigen::MatrixXd& val(Var v) const { return nodes_[v.index()].value; }

    std::vector<Node> nodes_;
};

inline const Eigen::MatrixXd& Var::value() const { return tape_->value(idx_); }

// Operator sugar so templated elementwise formulas (the dynamics terms)
// instantiate with Var exactly as they do with double.

inline Var operator+(Var a, Var b) { return a.tape()->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape()->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape()->mul(a, b); }
inline Var operator+(Var a, double k) { return a.tape()->add_const(a, k); }
inline Var operator+(double k, Var a) { return a.tape()->add_const(a, k); }
inline Var operator-(Var a, double k) { return a.tape()->add_const(a, -k); }
inline Var operator-(double k, Var a) { return a.tape()->add_const(a.tape()->neg(a), k); }
inline Var operator*(Var a, double k) { return a.tape()->mul_const(a, k); }
inline Var operator*(double k, Var a) { return a.tape()->mul_const(a, k); }
inline Var operator/(Var a, double k) { return a.tape()->mul_const(a, 1.0 / k); }
inline Var operator-(Var a) { return a.tape()->neg(a); }
inline Var sin(Var a) { return a.tape()->sin(a); }
inline Var cos(Var a) { return a.tape()->cos(a); }
inline Var tanh(Var a) { return a.tape()->tanh(a); }
inline Var square(Var a) { return a.tape()->square(a); }

} // namespace emgpinn::ad

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "emgpinn/autodiff.hpp"

using namespace emgpinn;
using emgpinn::ad::Tape;
using emgpinn::ad::Var;

namespace {

Eigen::MatrixXd rand_mat(std::mt19937_64& rng, int r, int c, double lo = -1, double hi = 1) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = u(rng);
    return m;
}

// Finite-difference derivative of a scalar tape expression with respect to
// one leaf matrix, entry by entry. The oracle for every backward rule.
template <typename Builder>
Eigen::MatrixXd fd_leaf_grad(const Builder& build, Eigen::MatrixXd x, double h = 1e-6) {
    Eigen::MatrixXd g(x.rows(), x.cols());
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < x.cols(); ++j) {
            const double orig = x(i, j);
            x(i, j) = orig + h;
            Tape tp;
            const double fp = build(tp, tp.leaf(x)).scalar();
            x(i, j) = orig - h;
            Tape tm;
            const double fm = build(tm, tm.leaf(x)).scalar();
            x(i, j) = orig;
            g(i, j) = (fp - fm) / (2 * h);
        }
    return g;
}

template <typename Builder>
void check_against_fd(const Builder& build, const Eigen::MatrixXd& x, double tol = 1e-7) {
    Tape tape;
    Var leaf = tape.leaf(x);
    Var root = build(tape, leaf);
    auto adj = tape.backward(root);
    Eigen::MatrixXd fd = fd_leaf_grad(build, x);
    ASSERT_EQ(adj[leaf.index()].rows(), fd.rows());
    ASSERT_EQ(adj[leaf.index()].cols(), fd.cols());
    EXPECT_LT((adj[leaf.index()] - fd).cwiseAbs().maxCoeff(), tol)
        << "analytic:\n" << adj[leaf.index()] << "\nfd:\n" << fd;
}

} // namespace

TEST(Tape, ForwardValues) {
    Tape t;
    Var a = t.leaf((Eigen::MatrixXd(2, 2) << 1, 2, 3, 4).finished());
    Var b = t.leaf((Eigen::MatrixXd(2, 2) << 0, 1, 1, 0).finished());
    EXPECT_DOUBLE_EQ(t.matmul(a, b).value()(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(t.add(a, b).value()(1, 1), 4.0);
    EXPECT_DOUBLE_EQ(t.sub(a, b).value()(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(t.mul(a, a).value()(1, 0), 9.0);
    EXPECT_DOUBLE_EQ(t.sum_all(a).scalar(), 10.0);
    EXPECT_DOUBLE_EQ(t.square(a).value()(1, 1), 16.0);
    EXPECT_DOUBLE_EQ(t.mul_const(a, 0.5).value()(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(t.add_const(a, 3.0).value()(0, 0), 4.0);
    EXPECT_NEAR(t.tanh(a).value()(0, 0), std::tanh(1.0), 1e-15);
    EXPECT_NEAR(t.sigmoid(a).value()(0, 0), 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
    EXPECT_NEAR(t.sin(a).value()(0, 1), std::sin(2.0), 1e-15);
    EXPECT_NEAR(t.cos(a).value()(1, 0), std::cos(3.0), 1e-15);
}

TEST(Tape, SliceForwardAndBackward) {
    std::mt19937_64 rng(5);
    Eigen::MatrixXd x = rand_mat(rng, 3, 6);
    {
        Tape t;
        Var leaf = t.leaf(x);
        Var s = t.slice_cols(leaf, 2, 3);
        EXPECT_TRUE(s.value().isApprox(x.middleCols(2, 3)));
        auto adj = t.backward(t.sum_all(t.square(s)));
        Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(3, 6);
        expected.middleCols(2, 3) = 2.0 * x.middleCols(2, 3);
        EXPECT_TRUE(adj[leaf.index()].isApprox(expected, 1e-12));
    }
    {
        Tape t;
        Var leaf = t.leaf(x);
        Var s = t.slice_rows(leaf, 1, 2);
        EXPECT_TRUE(s.value().isApprox(x.middleRows(1, 2)));
        auto adj = t.backward(t.sum_all(t.square(s)));
        Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(3, 6);
        expected.middleRows(1, 2) = 2.0 * x.middleRows(1, 2);
        EXPECT_TRUE(adj[leaf.index()].isApprox(expected, 1e-12));
    }
}

TEST(Backward, EveryUnaryOpMatchesFiniteDifferences) {
    std::mt19937_64 rng(42);
    Eigen::MatrixXd x = rand_mat(rng, 3, 4);
    check_against_fd([](Tape& t, Var a) { return t.sum_all(t.tanh(a)); }, x);
    check_against_fd([](Tape& t, Var a) { return t.sum_all(t.sigmoid(a)); }, x);
    check_against_fd([](Tape& t, Var a) { return t.sum_all(t.sin(a)); }, x);
    check_against_fd([](Tape& t, Var a) { return t.sum_all(t.cos(a)); }, x);
    check_against_fd([](Tape& t, Var a) { return t.sum_all(t.square(a)); }, x);
    check_against_fd([](Tape& t, Var a) { return t.sum_all(t.neg(a)); }, x);
    check_against_fd([](Tape& t, Var a) { return t.sum_all(t.mul_const(a, -2.5)); }, x);
    check_against_fd([](Tape& t, Var a) { return t.sum_all(t.add_const(a, 0.7)); }, x);
}

TEST(Backward, BinaryOpsMatchFiniteDifferences) {
    std::mt19937_64 rng(43);
    Eigen::MatrixXd x = rand_mat(rng, 3, 4);
    Eigen::MatrixXd w = rand_mat(rng, 2, 3);
    Eigen::MatrixXd b = rand_mat(rng, 2, 1);

    // gradient with respect to x through a matmul
    check_against_fd(
        [w](Tape& t, Var a) { return t.sum_all(t.square(t.matmul(t.leaf(w), a))); }, x);
    // gradient with respect to w
    check_against_fd(
        [x](Tape& t, Var a) { return t.sum_all(t.square(t.matmul(a, t.leaf(x)))); }, w);
    // broadcast bias
    check_against_fd(
        [w, x](Tape& t, Var a) {
            return t.sum_all(t.square(t.add_colwise(t.matmul(t.leaf(w), t.leaf(x)), a)));
        },
        b);
    // elementwise ops
    Eigen::MatrixXd y = rand_mat(rng, 3, 4);
    check_against_fd([y](Tape& t, Var a) { return t.sum_all(t.mul(a, t.leaf(y))); }, x);
    check_against_fd(
        [y](Tape& t, Var a) { return t.sum_all(t.square(t.sub(a, t.leaf(y)))); }, x);
    check_against_fd([y](Tape& t, Var a) { return t.sum_all(t.add(t.mul(a, a), t.leaf(y))); },
                     x);
}

TEST(Backward, FanOutAccumulates) {
    // f(a) = sum(a*a) + sum(a), so df/da = 2a + 1 with a used twice
    std::mt19937_64 rng(44);
    Eigen::MatrixXd x = rand_mat(rng, 2, 3);
    Tape t;
    Var a = t.leaf(x);
    Var root = t.add(t.sum_all(t.mul(a, a)), t.sum_all(a));
    auto adj = t.backward(root);
    Eigen::MatrixXd expected = 2.0 * x + Eigen::MatrixXd::Ones(2, 3);
    EXPECT_TRUE(adj[a.index()].isApprox(expected, 1e-12));
}

TEST(Backward, DeepChainComposition) {
    std::mt19937_64 rng(45);
    Eigen::MatrixXd x = rand_mat(rng, 2, 2, -0.5, 0.5);
    check_against_fd(
        [](Tape& t, Var a) {
            Var h = a;
            for (int i = 0; i < 5; ++i) h = t.tanh(t.mul_const(h, 1.3));
            return t.sum_all(t.square(t.sin(h)));
        },
        x, 1e-6);
}

TEST(Backward, RootMustBeScalarAndFinite) {
    Tape t;
    Var a = t.leaf(Eigen::MatrixXd::Ones(2, 2));
    EXPECT_THROW(t.backward(a), std::logic_error);
    Var inf = t.leaf(Eigen::MatrixXd::Constant(
        1, 1, std::numeric_limits<double>::infinity()));
    EXPECT_THROW(t.backward(inf), ad::NonFiniteLoss);
}

TEST(OperatorSugar, MatchesExplicitTapeCalls) {
    Tape t;
    Var a = t.constant(0.4);
    Var b = t.constant(-1.2);
    Var expr = ad::sin(a) * b + ad::square(a - 2.0 * b) - a / 4.0;
    const double expect = std::sin(0.4) * -1.2 + std::pow(0.4 - 2.0 * -1.2, 2) - 0.1;
    EXPECT_NEAR(expr.scalar(), expect, 1e-14);

    auto adj = t.backward(expr);
    // d/da = cos(a)*b + 2(a - 2b) - 1/4
    const double da = std::cos(0.4) * -1.2 + 2 * (0.4 + 2.4) - 0.25;
    EXPECT_NEAR(adj[a.index()](0, 0), da, 1e-12);
    // d/db = sin(a) + 2(a - 2b)(-2)
    const double db = std::sin(0.4) - 4 * (0.4 + 2.4);
    EXPECT_NEAR(adj[b.index()](0, 0), db, 1e-12);
}

TEST(Backward, MixedGraphRandomized) {
    std::mt19937_64 rng(46);
    for (int k = 0; k < 20; ++k) {
        Eigen::MatrixXd x = rand_mat(rng, 3, 5, -0.8, 0.8);
        check_against_fd(
            [](Tape& t, Var a) {
                Var s = t.sigmoid(a);
                Var c = t.cos(t.mul(a, s));
                Var sl = t.slice_cols(c, 1, 3);
                return t.mul_const(t.sum_all(t.square(sl)), 0.5);
            },
            x, 1e-6);
    }
}

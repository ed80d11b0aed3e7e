#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "synthetic.hpp"
#include "truthprobe/optimize.hpp"

using namespace truthprobe;
namespace tt = truthprobe::testing;

namespace {

struct Problem {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
};

Problem random_problem(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Eigen::VectorXd w = tt::random_normal(d, rng);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    Problem p;
    p.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    p.y.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::VectorXd x = tt::random_normal(d, rng);
        p.X.row(static_cast<Eigen::Index>(i)) = x.transpose();
        p.y[static_cast<Eigen::Index>(i)] = U(rng) < 1.0 / (1.0 + std::exp(-x.dot(w))) ? 1.0 : 0.0;
    }
    return p;
}

}  // namespace

TEST(Optimize, SigmoidAndSoftplusAreStable) {
    EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
    EXPECT_EQ(sigmoid(-1000.0), 0.0);
    EXPECT_EQ(sigmoid(1000.0), 1.0);
    EXPECT_NEAR(softplus(800.0), 800.0, 1e-12);
    EXPECT_NEAR(softplus(-800.0), 0.0, 1e-300);
    for (double z : {-30.0, -3.0, -0.1, 0.0, 0.7, 12.0}) {
        EXPECT_NEAR(sigmoid(z) + sigmoid(-z), 1.0, 1e-15);
        EXPECT_NEAR(softplus(z), std::log1p(std::exp(z)), 1e-12);
    }
}

TEST(Optimize, ObjectiveMatchesReference) {
    const auto p = random_problem(40, 5, 2);
    std::mt19937_64 rng(8);
    const LogisticObjective f(p.X, p.y, 0.3);
    for (int k = 0; k < 5; ++k) {
        const Eigen::VectorXd w = tt::random_normal(6, rng);
        EXPECT_NEAR(f.value(w), tt::reference_objective(p.X, p.y, 0.3, w), 1e-12);
    }
}

TEST(Optimize, GradientMatchesCentralDifferences) {
    const auto p = random_problem(50, 10, 4);
    std::mt19937_64 rng(9);
    const LogisticObjective f(p.X, p.y, 1.0);
    for (int k = 0; k < 10; ++k) {
        const Eigen::VectorXd w = tt::random_normal(11, rng);
        Eigen::VectorXd g;
        f.value_and_gradient(w, g);
        const double h = 1e-5;
        for (Eigen::Index j = 0; j < w.size(); ++j) {
            Eigen::VectorXd a = w, b = w;
            a[j] += h;
            b[j] -= h;
            const double fd = (tt::reference_objective(p.X, p.y, 1.0, a) -
                               tt::reference_objective(p.X, p.y, 1.0, b)) /
                              (2 * h);
            const double scale = std::max({std::abs(fd), std::abs(g[j]), 1e-6});
            EXPECT_LT(std::abs(fd - g[j]) / scale, 1e-4) << "point " << k << " coord " << j;
        }
    }
}

TEST(Optimize, HessianMatchesGradientDifferences) {
    const auto p = random_problem(30, 4, 6);
    const LogisticObjective f(p.X, p.y, 0.5);
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(5, 0.2);
    const Eigen::MatrixXd H = f.hessian(w);
    const double h = 1e-6;
    for (Eigen::Index j = 0; j < 5; ++j) {
        Eigen::VectorXd a = w, b = w, ga, gb;
        a[j] += h;
        b[j] -= h;
        f.value_and_gradient(a, ga);
        f.value_and_gradient(b, gb);
        EXPECT_LE(((ga - gb) / (2 * h) - H.col(j)).cwiseAbs().maxCoeff(), 1e-6);
    }
}

TEST(Optimize, TraceIsMonotoneAndConverges) {
    const auto p = random_problem(200, 8, 10);
    for (Solver s : {Solver::newton, Solver::lbfgs}) {
        const auto fit = fit_logistic(p.X, p.y, 1.0, s);
        EXPECT_TRUE(fit.report.converged) << to_string(s);
        EXPECT_LE(fit.report.gradient_norm, 1e-6);
        ASSERT_FALSE(fit.report.objective_trace.empty());
        for (std::size_t i = 1; i < fit.report.objective_trace.size(); ++i) {
            EXPECT_LE(fit.report.objective_trace[i], fit.report.objective_trace[i - 1] + 1e-15);
        }
        EXPECT_DOUBLE_EQ(fit.report.objective, fit.report.objective_trace.back());
    }
}

TEST(Optimize, SolversAgree) {
    const auto p = random_problem(300, 20, 12);
    const auto a = fit_logistic(p.X, p.y, 0.01, Solver::newton);
    const auto b = fit_logistic(p.X, p.y, 0.01, Solver::lbfgs);
    EXPECT_NEAR(a.intercept, b.intercept, 1e-5);
    EXPECT_LE((a.weights - b.weights).cwiseAbs().maxCoeff(), 1e-5);
    EXPECT_NEAR(a.report.objective, b.report.objective, 1e-10);
}

TEST(Optimize, DefaultSolverBySize) {
    const auto small = random_problem(60, 4, 1);
    EXPECT_EQ(fit_logistic(small.X, small.y, 1.0).report.solver, Solver::newton);
    OptimizerOptions opts;
    opts.newton_max_dim = 3;
    EXPECT_EQ(fit_logistic(small.X, small.y, 1.0, opts).report.solver, Solver::lbfgs);
}

TEST(Optimize, SeparableUnpenalizedHitsCap) {
    Eigen::MatrixXd X(4, 1);
    X << -2, -1, 1, 2;
    Eigen::VectorXd y(4);
    y << 0, 0, 1, 1;
    OptimizerOptions opts;
    opts.max_iterations = 50;
    const auto fit = fit_logistic(X, y, 0.0, opts);
    EXPECT_TRUE(std::isfinite(fit.weights[0]));
    EXPECT_GT(fit.weights[0], 0.0);
    EXPECT_LE(fit.report.iterations, 50);
}

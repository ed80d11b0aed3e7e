#pragma once

// Penalized logistic regression and the deterministic full-batch solvers
// behind every probe head.
//
//   f(alpha, beta) = mean_i [ softplus(z_i) - y_i z_i ] + lambda * |beta|^2,
//   z_i = alpha + x_i . beta
//
// The intercept is never penalized. Parameter vectors are laid out as
// (alpha, beta_1, ..., beta_k).

#include <Eigen/Core>
#include <string>
#include <vector>

namespace truthprobe {

double sigmoid(double z);
double softplus(double z);

struct OptimizerOptions {
    int max_iterations = 500;
    double gradient_tolerance = 1e-6;
    // Parameter count up to which damped Newton is used; L-BFGS above.
    Eigen::Index newton_max_dim = 256;
    int lbfgs_memory = 10;
};

enum class Solver { newton, lbfgs };

struct OptimizerReport {
    Solver solver = Solver::newton;
    int iterations = 0;
    double objective = 0.0;
    double gradient_norm = 0.0;
    bool converged = false;  // false: iteration cap or line-search stall
    std::vector<double> objective_trace;  // one entry per accepted iterate, starting at w0
};

class LogisticObjective {
public:
    // X: n x k features, y: n targets in {0, 1}. Holds references; the
    // caller keeps X and y alive.
    LogisticObjective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda);

    Eigen::Index dim() const { return X_.cols() + 1; }
    double value(const Eigen::VectorXd& w) const;
    double value_and_gradient(const Eigen::VectorXd& w, Eigen::VectorXd& grad) const;
    Eigen::MatrixXd hessian(const Eigen::VectorXd& w) const;

private:
    Eigen::VectorXd scores(const Eigen::VectorXd& w) const;

    const Eigen::MatrixXd& X_;
    const Eigen::VectorXd& y_;
    double lambda_;
};

struct LogisticFit {
    double intercept = 0.0;
    Eigen::VectorXd weights;
    OptimizerReport report;
};

// Minimizes the objective from w = 0. Newton or L-BFGS per
// options.newton_max_dim, or forced with `solver`.
LogisticFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                         const OptimizerOptions& options = {});
LogisticFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                         Solver solver, const OptimizerOptions& options = {});

std::string_view to_string(Solver s);

}  // namespace truthprobe

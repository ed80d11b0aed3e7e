#include "truthprobe/optimize.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <deque>

#include "truthprobe/error.hpp"

namespace truthprobe {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

std::string_view to_string(Solver s) { return s == Solver::newton ? "newton" : "lbfgs"; }

LogisticObjective::LogisticObjective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                     double lambda)
    : X_(X), y_(y), lambda_(lambda) {
    if (X.rows() != y.size()) {
        throw Error(ErrorKind::dimension, "feature rows and target length differ");
    }
    if (X.rows() == 0) throw Error(ErrorKind::empty, "logistic fit on zero rows");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw Error(ErrorKind::out_of_range, "lambda must be finite and >= 0");
    }
}

Eigen::VectorXd LogisticObjective::scores(const Eigen::VectorXd& w) const {
    Eigen::VectorXd z = X_ * w.tail(X_.cols());
    z.array() += w[0];
    return z;
}

double LogisticObjective::value(const Eigen::VectorXd& w) const {
    const Eigen::VectorXd z = scores(w);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) loss += softplus(z[i]) - y_[i] * z[i];
    return loss / static_cast<double>(z.size()) + lambda_ * w.tail(X_.cols()).squaredNorm();
}

double LogisticObjective::value_and_gradient(const Eigen::VectorXd& w,
                                             Eigen::VectorXd& grad) const {
    const Eigen::VectorXd z = scores(w);
    const double inv_n = 1.0 / static_cast<double>(z.size());
    Eigen::VectorXd residual(z.size());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        loss += softplus(z[i]) - y_[i] * z[i];
        residual[i] = sigmoid(z[i]) - y_[i];
    }
    const auto beta = w.tail(X_.cols());
    grad.resize(dim());
    grad[0] = residual.sum() * inv_n;
    grad.tail(X_.cols()) = (X_.transpose() * residual) * inv_n + 2.0 * lambda_ * beta;
    return loss * inv_n + lambda_ * beta.squaredNorm();
}

Eigen::MatrixXd LogisticObjective::hessian(const Eigen::VectorXd& w) const {
    const Eigen::VectorXd z = scores(w);
    const double inv_n = 1.0 / static_cast<double>(z.size());
    Eigen::VectorXd weight(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double p = sigmoid(z[i]);
        weight[i] = p * (1.0 - p) * inv_n;
    }
    const Eigen::Index k = X_.cols();
    Eigen::MatrixXd H(k + 1, k + 1);
    const Eigen::MatrixXd WX = weight.asDiagonal() * X_;
    H(0, 0) = weight.sum();
    H.block(1, 0, k, 1) = WX.colwise().sum().transpose();
    H.block(0, 1, 1, k) = H.block(1, 0, k, 1).transpose();
    H.bottomRightCorner(k, k).noalias() = X_.transpose() * WX;
    H.bottomRightCorner(k, k).diagonal().array() += 2.0 * lambda_;
    return H;
}

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 60;

// Backtracking along `dir` from step t0. Returns false if no step gave
// sufficient decrease.
bool line_search(const LogisticObjective& obj, Eigen::VectorXd& w, double& f,
                 Eigen::VectorXd& grad, const Eigen::VectorXd& dir, double t0) {
    const double slope = grad.dot(dir);
    double t = t0;
    Eigen::VectorXd trial_grad;
    for (int i = 0; i < kMaxBacktracks; ++i) {
        const Eigen::VectorXd trial = w + t * dir;
        const double ft = obj.value_and_gradient(trial, trial_grad);
        if (std::isfinite(ft) && ft <= f + kArmijo * t * slope) {
            w = trial;
            f = ft;
            grad = std::move(trial_grad);
            return true;
        }
        t *= 0.5;
    }
    return false;
}

void run_newton(const LogisticObjective& obj, Eigen::VectorXd& w, const OptimizerOptions& opt,
                OptimizerReport& rep) {
    Eigen::VectorXd grad;
    double f = obj.value_and_gradient(w, grad);
    rep.objective_trace.push_back(f);
    const Eigen::Index k = obj.dim();

    while (true) {
        if (grad.norm() <= opt.gradient_tolerance) {
            rep.converged = true;
            break;
        }
        if (rep.iterations >= opt.max_iterations) break;

        Eigen::MatrixXd H = obj.hessian(w);
        const double scale = std::max(H.diagonal().cwiseAbs().maxCoeff(), 1e-300);
        Eigen::VectorXd dir;
        // Levenberg damping, raised until the step is a descent direction.
        for (double damping = 0.0; damping < 1e12 * scale;
             damping = damping == 0.0 ? 1e-12 * scale : damping * 100.0) {
            Eigen::MatrixXd Hd = H;
            Hd.diagonal().array() += damping;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(Hd);
            if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) continue;
            dir = ldlt.solve(-grad);
            if (dir.allFinite() && grad.dot(dir) < 0.0) break;
            dir.resize(0);
        }
        if (dir.size() != k) dir = -grad;

        if (!line_search(obj, w, f, grad, dir, 1.0)) break;
        ++rep.iterations;
        rep.objective_trace.push_back(f);
    }
    rep.objective = f;
    rep.gradient_norm = grad.norm();
}

void run_lbfgs(const LogisticObjective& obj, Eigen::VectorXd& w, const OptimizerOptions& opt,
               OptimizerReport& rep) {
    Eigen::VectorXd grad;
    double f = obj.value_and_gradient(w, grad);
    rep.objective_trace.push_back(f);

    std::deque<Eigen::VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;

    while (true) {
        if (grad.norm() <= opt.gradient_tolerance) {
            rep.converged = true;
            break;
        }
        if (rep.iterations >= opt.max_iterations) break;

        // Two-loop recursion.
        Eigen::VectorXd q = grad;
        std::vector<double> alpha(s_hist.size());
        for (std::size_t i = s_hist.size(); i-- > 0;) {
            alpha[i] = rho_hist[i] * s_hist[i].dot(q);
            q -= alpha[i] * y_hist[i];
        }
        if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double b = rho_hist[i] * y_hist[i].dot(q);
            q += (alpha[i] - b) * s_hist[i];
        }
        Eigen::VectorXd dir = -q;
        double t0 = 1.0;
        if (s_hist.empty() || !(grad.dot(dir) < 0.0)) {
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            dir = -grad;
            t0 = 1.0 / std::max(1.0, grad.norm());
        }

        const Eigen::VectorXd w_prev = w;
        const Eigen::VectorXd g_prev = grad;
        if (!line_search(obj, w, f, grad, dir, t0)) {
            if (s_hist.empty()) break;
            // Stale curvature; retry once from steepest descent.
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            continue;
        }
        ++rep.iterations;
        rep.objective_trace.push_back(f);

        Eigen::VectorXd s = w - w_prev;
        Eigen::VectorXd yv = grad - g_prev;
        const double sy = s.dot(yv);
        if (sy > 1e-12 * yv.squaredNorm() && sy > 0.0) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(yv));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > opt.lbfgs_memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
    }
    rep.objective = f;
    rep.gradient_norm = grad.norm();
}

}  // namespace

LogisticFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                         Solver solver, const OptimizerOptions& options) {
    if (!X.allFinite()) throw Error(ErrorKind::non_finite, "non-finite feature values");
    LogisticObjective obj(X, y, lambda);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(obj.dim());
    LogisticFit fit;
    fit.report.solver = solver;
    if (solver == Solver::newton) {
        run_newton(obj, w, options, fit.report);
    } else {
        run_lbfgs(obj, w, options, fit.report);
    }
    fit.intercept = w[0];
    fit.weights = w.tail(X.cols());
    return fit;
}

LogisticFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                         const OptimizerOptions& options) {
    const Solver solver = X.cols() + 1 <= options.newton_max_dim ? Solver::newton : Solver::lbfgs;
    return fit_logistic(X, y, lambda, solver, options);
}

}  // namespace truthprobe

#include "truthprobe/probes.hpp"

#include <Eigen/LU>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <vector>

#include "truthprobe/error.hpp"

namespace truthprobe {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(ProbeKind k) {
    switch (k) {
        case ProbeKind::lr: return "lr";
        case ProbeKind::mm: return "mm";
        case ProbeKind::ttpd: return "ttpd";
        case ProbeKind::ttpd_simple: return "ttpd_simple";
    }
    return "?";
}

ProbeKind parse_probe_kind(std::string_view s) {
    for (auto k : kAllProbeKinds) {
        if (to_string(k) == s) return k;
    }
    throw Error(ErrorKind::unknown_enum, "unknown probe kind '" + std::string(s) + "'");
}

namespace {

struct ClassCounts {
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

void check_inputs(const Eigen::MatrixXd& X, std::size_t n_labels) {
    if (static_cast<std::size_t>(X.rows()) != n_labels) {
        throw Error(ErrorKind::dimension, "activation rows (" + std::to_string(X.rows()) +
                                              ") and labels (" + std::to_string(n_labels) +
                                              ") differ");
    }
    if (X.cols() == 0) throw Error(ErrorKind::dimension, "activations have zero width");
    if (!X.allFinite()) throw Error(ErrorKind::non_finite, "non-finite activations");
}

ClassCounts require_both_classes(std::span<const Answer> y) {
    ClassCounts c;
    for (auto a : y) (a == Answer::yes ? c.positives : c.negatives) += 1;
    if (c.positives == 0 || c.negatives == 0) {
        throw Error(ErrorKind::single_class, "probe fit needs both labels present (yes: " +
                                                 std::to_string(c.positives) +
                                                 ", no: " + std::to_string(c.negatives) + ")");
    }
    return c;
}

Eigen::VectorXd targets(std::span<const Answer> y) {
    Eigen::VectorXd t(static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < y.size(); ++i) t[static_cast<Eigen::Index>(i)] = y[i] == Answer::yes;
    return t;
}

template <typename T>
double dot(const Eigen::VectorXd& v, std::span<const T> x) {
    if (static_cast<std::size_t>(v.size()) != x.size()) {
        throw Error(ErrorKind::dimension, "input has length " + std::to_string(x.size()) +
                                              ", probe expects " + std::to_string(v.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += v[static_cast<Eigen::Index>(i)] * static_cast<double>(x[i]);
    return s;
}

template <typename T>
double score_impl(const Probe& p, std::span<const T> x) {
    return std::visit(
        [&](const auto& probe) -> double {
            using P = std::decay_t<decltype(probe)>;
            if constexpr (std::is_same_v<P, LrProbe>) {
                return probe.alpha + dot(probe.beta, x);
            } else if constexpr (std::is_same_v<P, MmProbe>) {
                return probe.alpha + probe.beta * dot(probe.theta_mm, x);
            } else {
                return probe.alpha + probe.beta2[0] * dot(probe.theta_g, x) +
                       probe.beta2[1] * dot(probe.second_axis(), x);
            }
        },
        p);
}

// ---------------------------------------------------------------------------
// JSON

ordered_json vec_to_json(const Eigen::VectorXd& v, const char* name) {
    if (!v.allFinite()) {
        throw Error(ErrorKind::non_finite, std::string("probe vector '") + name + "' is not finite");
    }
    return ordered_json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vec_from_json(const ordered_json& j, const char* key, std::size_t d) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_array()) {
        throw Error(ErrorKind::format, std::string("probe json: missing array '") + key + "'");
    }
    const auto v = it->get<std::vector<double>>();
    if (v.size() != d) {
        throw Error(ErrorKind::shape_mismatch, std::string("probe json: '") + key + "' has length " +
                                                   std::to_string(v.size()) + ", d = " +
                                                   std::to_string(d));
    }
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

ordered_json report_to_json(const OptimizerReport& r) {
    ordered_json j;
    j["solver"] = to_string(r.solver);
    j["iterations"] = r.iterations;
    j["objective"] = r.objective;
    j["gradient_norm"] = r.gradient_norm;
    j["converged"] = r.converged;
    return j;
}

OptimizerReport report_from_json(const ordered_json& j) {
    OptimizerReport r;
    if (!j.is_object()) return r;
    r.solver = j.value("solver", std::string("newton")) == "lbfgs" ? Solver::lbfgs : Solver::newton;
    r.iterations = j.value("iterations", 0);
    r.objective = j.value("objective", 0.0);
    r.gradient_norm = j.value("gradient_norm", 0.0);
    r.converged = j.value("converged", false);
    return r;
}

template <typename T>
T get_or_throw(const ordered_json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw Error(ErrorKind::format, std::string("probe json: missing '") + key + "'");
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorKind::format, std::string("probe json: '") + key + "' has the wrong type");
    }
}

}  // namespace

ProbeKind kind_of(const Probe& p) {
    if (std::holds_alternative<LrProbe>(p)) return ProbeKind::lr;
    if (std::holds_alternative<MmProbe>(p)) return ProbeKind::mm;
    return std::get<TtpdProbe>(p).simple ? ProbeKind::ttpd_simple : ProbeKind::ttpd;
}

std::size_t layer_of(const Probe& p) {
    return std::visit([](const auto& probe) { return probe.layer; }, p);
}

std::size_t dim_of(const Probe& p) {
    return std::visit(
        [](const auto& probe) -> std::size_t {
            using P = std::decay_t<decltype(probe)>;
            if constexpr (std::is_same_v<P, LrProbe>) return static_cast<std::size_t>(probe.beta.size());
            else if constexpr (std::is_same_v<P, MmProbe>) return static_cast<std::size_t>(probe.theta_mm.size());
            else return static_cast<std::size_t>(probe.theta_g.size());
        },
        p);
}

const OptimizerReport& fit_report(const Probe& p) {
    return std::visit([](const auto& probe) -> const OptimizerReport& { return probe.fit; }, p);
}

TruthDirections ttpd_directions(const Eigen::MatrixXd& X, std::span<const Answer> y,
                                std::span<const Polarity> pi) {
    check_inputs(X, y.size());
    if (pi.size() != y.size()) throw Error(ErrorKind::dimension, "polarity and label lengths differ");
    require_both_classes(y);

    const Eigen::Index n = X.rows();
    TruthDirections out;
    out.abar = X.colwise().mean().transpose();
    const Eigen::MatrixXd centered = X.rowwise() - out.abar.transpose();

    Eigen::MatrixXd design(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double tau = y[static_cast<std::size_t>(i)] == Answer::yes ? 1.0 : -1.0;
        design(i, 0) = tau;
        design(i, 1) = tau * polarity_sign(pi[static_cast<std::size_t>(i)]);
    }
    const Eigen::Matrix2d gram = design.transpose() * design;
    Eigen::FullPivLU<Eigen::Matrix2d> lu(gram);
    if (lu.rank() < 2) {
        throw Error(ErrorKind::collinear,
                    "TTPD design [tau, tau*pi] is rank deficient (are both polarities present?)");
    }
    const Eigen::MatrixXd rhs = design.transpose() * centered;  // 2 x d
    const Eigen::MatrixXd theta = lu.solve(rhs);
    out.theta_g = theta.row(0).transpose();
    out.theta_p = theta.row(1).transpose();
    return out;
}

LrProbe fit_lr(const Eigen::MatrixXd& X, std::span<const Answer> y, double lambda,
               std::size_t layer, const OptimizerOptions& options) {
    check_inputs(X, y.size());
    if (X.rows() < 2) throw Error(ErrorKind::invalid_argument, "fit_lr needs at least 2 rows");
    require_both_classes(y);
    const Eigen::VectorXd t = targets(y);
    auto fit = fit_logistic(X, t, lambda, options);
    return LrProbe{fit.intercept, std::move(fit.weights), layer, lambda, std::move(fit.report)};
}

MmProbe fit_mm(const Eigen::MatrixXd& X, std::span<const Answer> y, std::size_t layer,
               const OptimizerOptions& options) {
    check_inputs(X, y.size());
    const auto counts = require_both_classes(y);

    MmProbe p;
    p.layer = layer;
    p.mu_pos = Eigen::VectorXd::Zero(X.cols());
    p.mu_neg = Eigen::VectorXd::Zero(X.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        (y[static_cast<std::size_t>(i)] == Answer::yes ? p.mu_pos : p.mu_neg) += X.row(i).transpose();
    }
    p.mu_pos /= static_cast<double>(counts.positives);
    p.mu_neg /= static_cast<double>(counts.negatives);
    p.theta_mm = p.mu_pos - p.mu_neg;

    const Eigen::MatrixXd proj = X * p.theta_mm;
    const Eigen::VectorXd t = targets(y);
    auto fit = fit_logistic(proj, t, 0.0, options);
    p.alpha = fit.intercept;
    p.beta = fit.weights[0];
    p.fit = std::move(fit.report);
    return p;
}

namespace {

TtpdProbe fit_ttpd_impl(const Eigen::MatrixXd& X, std::span<const Answer> y,
                        std::span<const Polarity> pi, double lambda, std::size_t layer,
                        bool simple, const OptimizerOptions& options) {
    auto dirs = ttpd_directions(X, y, pi);

    TtpdProbe p;
    p.layer = layer;
    p.lambda = lambda;
    p.simple = simple;
    p.abar = std::move(dirs.abar);
    p.theta_g = std::move(dirs.theta_g);
    p.theta_p = std::move(dirs.theta_p);

    if (!simple) {
        Eigen::VectorXd is_assert(X.rows());
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            is_assert[i] = pi[static_cast<std::size_t>(i)] == Polarity::assert_;
        }
        auto pol = fit_logistic(X, is_assert, lambda, options);
        p.theta_pol = std::move(pol.weights);
        p.polarity_fit = std::move(pol.report);
    }

    Eigen::MatrixXd projected(X.rows(), 2);
    projected.col(0) = X * p.theta_g;
    projected.col(1) = X * p.second_axis();
    const Eigen::VectorXd t = targets(y);
    auto head = fit_logistic(projected, t, 0.0, options);
    p.alpha = head.intercept;
    p.beta2 = head.weights;
    p.fit = std::move(head.report);
    return p;
}

}  // namespace

TtpdProbe fit_ttpd(const Eigen::MatrixXd& X, std::span<const Answer> y,
                   std::span<const Polarity> pi, double lambda, std::size_t layer,
                   const OptimizerOptions& options) {
    return fit_ttpd_impl(X, y, pi, lambda, layer, false, options);
}

TtpdProbe fit_ttpd_simple(const Eigen::MatrixXd& X, std::span<const Answer> y,
                          std::span<const Polarity> pi, std::size_t layer,
                          const OptimizerOptions& options) {
    return fit_ttpd_impl(X, y, pi, 0.0, layer, true, options);
}

Probe fit_probe(ProbeKind kind, const Eigen::MatrixXd& X, std::span<const Answer> y,
                std::span<const Polarity> pi, double lambda, std::size_t layer,
                const OptimizerOptions& options) {
    switch (kind) {
        case ProbeKind::lr: return fit_lr(X, y, lambda, layer, options);
        case ProbeKind::mm: return fit_mm(X, y, layer, options);
        case ProbeKind::ttpd: return fit_ttpd(X, y, pi, lambda, layer, options);
        case ProbeKind::ttpd_simple: return fit_ttpd_simple(X, y, pi, layer, options);
    }
    throw Error(ErrorKind::invalid_argument, "bad probe kind");
}

double score(const Probe& p, std::span<const double> x) { return score_impl(p, x); }
double score(const Probe& p, std::span<const float> x) { return score_impl(p, x); }
double predict(const Probe& p, std::span<const double> x) { return sigmoid(score(p, x)); }
double predict(const Probe& p, std::span<const float> x) { return sigmoid(score(p, x)); }

std::string probe_to_json(const Probe& p) {
    ordered_json j;
    j["kind"] = to_string(kind_of(p));
    j["layer"] = layer_of(p);
    j["d"] = dim_of(p);
    std::visit(
        [&](const auto& probe) {
            using P = std::decay_t<decltype(probe)>;
            if constexpr (std::is_same_v<P, LrProbe>) {
                j["lambda"] = probe.lambda;
                j["alpha"] = probe.alpha;
                j["beta"] = vec_to_json(probe.beta, "beta");
            } else if constexpr (std::is_same_v<P, MmProbe>) {
                j["lambda"] = 0.0;
                j["alpha"] = probe.alpha;
                j["beta"] = probe.beta;
                j["theta_mm"] = vec_to_json(probe.theta_mm, "theta_mm");
                j["mu_pos"] = vec_to_json(probe.mu_pos, "mu_pos");
                j["mu_neg"] = vec_to_json(probe.mu_neg, "mu_neg");
            } else {
                j["lambda"] = probe.lambda;
                j["alpha"] = probe.alpha;
                j["beta"] = {probe.beta2[0], probe.beta2[1]};
                j["abar"] = vec_to_json(probe.abar, "abar");
                j["theta_g"] = vec_to_json(probe.theta_g, "theta_g");
                j["theta_p"] = vec_to_json(probe.theta_p, "theta_p");
                if (!probe.simple) {
                    j["theta_pol"] = vec_to_json(probe.theta_pol, "theta_pol");
                    j["polarity_fit"] = report_to_json(probe.polarity_fit);
                }
            }
            j["fit"] = report_to_json(probe.fit);
        },
        p);
    return j.dump(2);
}

Probe probe_from_json(std::string_view text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::format, std::string("probe json: ") + e.what());
    }
    if (!j.is_object()) throw Error(ErrorKind::format, "probe json: not an object");
    const auto kind = parse_probe_kind(get_or_throw<std::string>(j, "kind"));
    const auto layer = get_or_throw<std::size_t>(j, "layer");
    const auto d = get_or_throw<std::size_t>(j, "d");
    const auto lambda = get_or_throw<double>(j, "lambda");
    const auto alpha = get_or_throw<double>(j, "alpha");
    const auto fit = report_from_json(j.value("fit", ordered_json::object()));

    switch (kind) {
        case ProbeKind::lr:
            return LrProbe{alpha, vec_from_json(j, "beta", d), layer, lambda, fit};
        case ProbeKind::mm: {
            MmProbe p;
            p.theta_mm = vec_from_json(j, "theta_mm", d);
            p.mu_pos = vec_from_json(j, "mu_pos", d);
            p.mu_neg = vec_from_json(j, "mu_neg", d);
            p.alpha = alpha;
            p.beta = get_or_throw<double>(j, "beta");
            p.layer = layer;
            p.fit = fit;
            return p;
        }
        case ProbeKind::ttpd:
        case ProbeKind::ttpd_simple: {
            TtpdProbe p;
            p.simple = kind == ProbeKind::ttpd_simple;
            p.abar = vec_from_json(j, "abar", d);
            p.theta_g = vec_from_json(j, "theta_g", d);
            p.theta_p = vec_from_json(j, "theta_p", d);
            if (!p.simple) {
                p.theta_pol = vec_from_json(j, "theta_pol", d);
                p.polarity_fit = report_from_json(j.value("polarity_fit", ordered_json::object()));
            }
            const auto beta = get_or_throw<std::vector<double>>(j, "beta");
            if (beta.size() != 2) throw Error(ErrorKind::format, "probe json: ttpd beta must have 2 entries");
            p.alpha = alpha;
            p.beta2 = {beta[0], beta[1]};
            p.layer = layer;
            p.lambda = lambda;
            p.fit = fit;
            return p;
        }
    }
    throw Error(ErrorKind::format, "probe json: bad kind");
}

void save_probe(const Probe& p, const std::string& path) {
    const auto text = probe_to_json(p);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path);
    out << text << '\n';
    if (!out) throw Error(ErrorKind::io, "short write on " + path);
}

Probe load_probe(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::missing_file, "missing probe file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return probe_from_json(ss.str());
}

}  // namespace truthprobe

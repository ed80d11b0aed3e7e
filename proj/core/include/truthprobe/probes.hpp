#pragma once

// Linear truth probes over residual-stream activations.
//
//   lr           sigma(alpha + beta . a), ridge-penalized weights
//   mm           sigma(alpha + beta * theta_mm . a), theta_mm = mu+ - mu-
//   ttpd         sigma(alpha + beta2 . (a . theta_g, a . theta_pol))
//   ttpd_simple  sigma(alpha + beta2 . (a . theta_g, a . theta_p))
//
// TTPD's truth and polarity-sensitive directions come from OLS of the
// mean-centered activations on the design [tau, tau * pi], tau = 2y - 1,
// pi = +1 for assertions and -1 for negations. theta_pol is a ridge
// logistic regression separating the two polarities on raw activations.

#include <Eigen/Core>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>

#include "truthprobe/optimize.hpp"
#include "truthprobe/types.hpp"

namespace truthprobe {

enum class ProbeKind { lr, mm, ttpd, ttpd_simple };

inline constexpr std::array kAllProbeKinds{ProbeKind::lr, ProbeKind::mm, ProbeKind::ttpd,
                                           ProbeKind::ttpd_simple};

std::string_view to_string(ProbeKind k);
ProbeKind parse_probe_kind(std::string_view s);

struct LrProbe {
    double alpha = 0.0;
    Eigen::VectorXd beta;
    std::size_t layer = 0;
    double lambda = 1.0;
    OptimizerReport fit;
};

struct MmProbe {
    Eigen::VectorXd theta_mm;
    Eigen::VectorXd mu_pos;
    Eigen::VectorXd mu_neg;
    double alpha = 0.0;
    double beta = 0.0;
    std::size_t layer = 0;
    OptimizerReport fit;
};

struct TtpdProbe {
    Eigen::VectorXd abar;
    Eigen::VectorXd theta_g;
    Eigen::VectorXd theta_p;    // persisted; the head only reads it when simple
    Eigen::VectorXd theta_pol;  // empty for the simple variant
    double alpha = 0.0;
    Eigen::Vector2d beta2 = Eigen::Vector2d::Zero();
    std::size_t layer = 0;
    double lambda = 1.0;  // penalty used for theta_pol
    bool simple = false;
    OptimizerReport polarity_fit;
    OptimizerReport fit;

    // Second projection axis of the 2-D head.
    const Eigen::VectorXd& second_axis() const { return simple ? theta_p : theta_pol; }
};

using Probe = std::variant<LrProbe, MmProbe, TtpdProbe>;

ProbeKind kind_of(const Probe& p);
std::size_t layer_of(const Probe& p);
std::size_t dim_of(const Probe& p);
const OptimizerReport& fit_report(const Probe& p);

// First TTPD stage: centering and the 2 x d normal-equations solve.
struct TruthDirections {
    Eigen::VectorXd abar;
    Eigen::VectorXd theta_g;
    Eigen::VectorXd theta_p;
};

// Throws Error{single_class} without both labels, Error{collinear} when the
// design is rank deficient (in particular a single polarity).
TruthDirections ttpd_directions(const Eigen::MatrixXd& X, std::span<const Answer> y,
                                std::span<const Polarity> pi);

LrProbe fit_lr(const Eigen::MatrixXd& X, std::span<const Answer> y, double lambda = 1.0,
               std::size_t layer = 0, const OptimizerOptions& options = {});
MmProbe fit_mm(const Eigen::MatrixXd& X, std::span<const Answer> y, std::size_t layer = 0,
               const OptimizerOptions& options = {});
TtpdProbe fit_ttpd(const Eigen::MatrixXd& X, std::span<const Answer> y,
                   std::span<const Polarity> pi, double lambda = 1.0, std::size_t layer = 0,
                   const OptimizerOptions& options = {});
TtpdProbe fit_ttpd_simple(const Eigen::MatrixXd& X, std::span<const Answer> y,
                          std::span<const Polarity> pi, std::size_t layer = 0,
                          const OptimizerOptions& options = {});

// Fit any kind; `lambda` applies to lr and to ttpd's polarity direction.
Probe fit_probe(ProbeKind kind, const Eigen::MatrixXd& X, std::span<const Answer> y,
                std::span<const Polarity> pi, double lambda, std::size_t layer,
                const OptimizerOptions& options = {});

// Affine score before the sigmoid. Throws Error{dimension} on length mismatch.
double score(const Probe& p, std::span<const double> x);
double score(const Probe& p, std::span<const float> x);

double predict(const Probe& p, std::span<const double> x);
double predict(const Probe& p, std::span<const float> x);

// probe.json round trip. Reload reproduces predictions within 1e-12.
std::string probe_to_json(const Probe& p);
Probe probe_from_json(std::string_view text);
void save_probe(const Probe& p, const std::string& path);
Probe load_probe(const std::string& path);

}  // namespace truthprobe

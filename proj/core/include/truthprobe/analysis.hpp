#pragma once

// Result tables: grouped mean/sd of continuation and probe probabilities,
// assertion-vs-negation consistency fits, and per-condition comparisons.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "truthprobe/dataset.hpp"
#include "truthprobe/pipeline.hpp"

namespace truthprobe {

enum class GroupKey { entity, polarity, modality, condition };

std::string_view to_string(GroupKey k);
GroupKey parse_group_key(std::string_view s);
// Comma-separated list, e.g. "entity,polarity".
std::vector<GroupKey> parse_group_keys(std::string_view csv_list);

inline constexpr std::string_view kContinuationSource = "continuation";
inline constexpr std::string_view kPooled = "*";

// Unset fields were pooled over.
struct GroupLabel {
    std::optional<Entity> entity;
    std::optional<Polarity> polarity;
    std::optional<Modality> modality;
    std::optional<PromptCondition> condition;

    auto operator<=>(const GroupLabel&) const = default;
};

struct SummaryCell {
    GroupLabel group;
    std::string source;  // "continuation" or a probe kind
    double mean = 0.0;
    double sd = 0.0;  // sample sd (n - 1); 0 when n == 1
    double se = 0.0;
    std::size_t n = 0;
};

// Continuation is yes_prob. Cells are ordered by group, then source
// (continuation first, then the bundle's probe order). Throws Error{empty}
// on an empty dataset.
std::vector<SummaryCell> summarize(const ActivationDataset& ds, const ProbeBundle& bundle,
                                   std::span<const GroupKey> keys);

// summarize() with condition added to the keys. Throws Error{invalid_argument}
// with fewer than two conditions present.
std::vector<SummaryCell> condition_shift(const ActivationDataset& ds, const ProbeBundle& bundle,
                                         std::span<const GroupKey> keys);

struct OlsFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

// y = intercept + slope * x. Throws Error{invalid_argument} with fewer than
// two points or zero variance in x. Constant y gives slope 0, r2 0.
OlsFit ols_fit(std::span<const double> x, std::span<const double> y);

struct ConsistencyFit {
    Entity entity = Entity::human;
    std::string source;
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::vector<std::string> base_ids;
    std::vector<std::pair<double, double>> points;  // (p_negate, p_assert)

    std::size_t n_pairs() const { return points.size(); }
};

struct ConsistencyReport {
    PromptCondition condition = PromptCondition::default_;
    std::vector<ConsistencyFit> fits;
    std::vector<std::string> notices;  // skipped fits
    std::size_t unpaired_rows = 0;
};

inline constexpr std::size_t kMinConsistencyPairs = 3;

// Pairs assert/negate rows sharing (base_id, entity) under `condition` and
// regresses p_assert on p_negate per (entity, source).
ConsistencyReport consistency(const ActivationDataset& ds, const ProbeBundle& bundle,
                              PromptCondition condition = PromptCondition::default_);

// Export. CSV columns:
//   summary:     entity,polarity,modality,condition,source,mean,sd,se,n
//   consistency: entity,source,slope,intercept,r2,n_pairs
// Floats carry 6 significant digits. Pooled group fields print as "*".
enum class ReportFormat { csv, json };
ReportFormat parse_report_format(std::string_view s);

void write_summary_csv(std::ostream& out, std::span<const SummaryCell> cells);
void write_summary_json(std::ostream& out, std::span<const SummaryCell> cells);
void write_consistency_csv(std::ostream& out, std::span<const ConsistencyFit> fits);
void write_consistency_json(std::ostream& out, const ConsistencyReport& report);

void export_report(std::span<const SummaryCell> cells, const std::string& path,
                   std::string_view format);
void export_report(const ConsistencyReport& report, const std::string& path,
                   std::string_view format);

std::vector<SummaryCell> read_summary_csv(std::istream& in);

std::string format_float(double v);

}  // namespace truthprobe

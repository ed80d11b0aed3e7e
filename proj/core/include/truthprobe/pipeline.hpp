#pragma once

// Training protocol: knowledge filter, grouped train/hold-out split, one
// probe per layer per kind, best layer by hold-out accuracy.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "truthprobe/dataset.hpp"
#include "truthprobe/probes.hpp"
#include "truthprobe/split.hpp"

namespace truthprobe {

struct AccuracyCell {
    PromptCondition condition = PromptCondition::default_;
    Polarity polarity = Polarity::assert_;
    std::size_t n = 0;
    std::size_t correct = 0;

    double accuracy() const { return n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0; }
};

struct AccuracyReport {
    double accuracy = 0.0;
    std::size_t n = 0;
    std::size_t correct = 0;
    std::vector<AccuracyCell> breakdown;  // by (condition, polarity), sorted
};

// A row counts as correct when (predict >= cutoff) equals (label == yes).
// Throws Error{empty} on no rows, Error{invalid_argument} on unlabeled rows.
AccuracyReport accuracy(const Probe& probe, const ActivationDataset& ds,
                        std::span<const std::size_t> rows, double cutoff = 0.5);

// Probe outputs for the given rows at the probe's layer.
std::vector<double> predict_rows(const Probe& probe, const ActivationDataset& ds,
                                 std::span<const std::size_t> rows);
std::vector<double> predict_all(const Probe& probe, const ActivationDataset& ds);

struct LayerAccuracy {
    std::size_t layer = 0;
    double accuracy = 0.0;
};

struct ExcludedLayer {
    std::size_t layer = 0;
    std::string reason;
};

struct SweepResult {
    ProbeKind kind = ProbeKind::lr;
    std::vector<LayerAccuracy> per_layer_accuracy;  // successful layers, ascending
    std::vector<ExcludedLayer> excluded;
    std::size_t best_layer = 0;
    double best_accuracy = 0.0;
};

struct SweepOptions {
    double lambda = 1.0;
    OptimizerOptions optimizer;
    unsigned threads = 0;  // 0: hardware concurrency
};

struct SweepOutcome {
    SweepResult result;
    Probe best_probe;
};

// Fits `kind` on split.train_rows at every layer and scores split.holdout_rows.
// Layers whose fit throws truthprobe::Error are excluded with the message;
// throws Error{empty} if every layer fails. Ties go to the lowest layer.
SweepOutcome sweep_layers(const ActivationDataset& ds, ProbeKind kind,
                          const SplitAssignment& split, const SweepOptions& options = {});

struct TrainConfig {
    double lambda = 1.0;
    double ratio = 0.8;
    std::uint64_t seed = 0;
    double threshold = 0.5;
    std::vector<ProbeKind> kinds{ProbeKind::lr, ProbeKind::mm, ProbeKind::ttpd};
    OptimizerOptions optimizer;
    unsigned threads = 0;
};

struct ProbeBundle {
    std::string model_id;
    std::size_t d = 0;
    std::size_t num_layers = 0;
    double lambda = 1.0;
    double filter_threshold = 0.5;
    std::size_t rows_before_filter = 0;
    std::size_t rows_after_filter = 0;
    SplitAssignment split;
    std::vector<std::string> holdout_base_ids;  // sorted
    std::vector<Probe> probes;                  // parallel to sweeps
    std::vector<SweepResult> sweeps;
    std::vector<std::string> warnings;

    const Probe* find(ProbeKind kind) const;
};

// filter_known -> split -> sweep per kind. Throws Error{empty} naming the
// threshold when the filter removes every row.
ProbeBundle train_all(const ActivationDataset& ds, const TrainConfig& config);

// bundle.json plus probe_{kind}.json per kind.
void save_bundle(const ProbeBundle& bundle, const std::string& dir);
ProbeBundle load_bundle(const std::string& dir);

}  // namespace truthprobe

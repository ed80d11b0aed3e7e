#pragma once

// On-disk activation dataset: manifest.json plus one layer_{k}.f32 file per
// layer, each n*d little-endian float32 values, row-major, row i = manifest
// row i. Layer 0 is the embedding output.

#include <Eigen/Core>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "truthprobe/types.hpp"

namespace truthprobe {

using LayerMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// yes_prob/no_prob are masses already summed over answer-token variants, so
// together they may fall short of 1.
struct ActivationSample {
    std::string base_id;
    Entity entity = Entity::human;
    Polarity polarity = Polarity::assert_;
    Modality modality = Modality::training;
    PromptCondition condition = PromptCondition::default_;
    double yes_prob = 0.0;
    double no_prob = 0.0;
    std::optional<Answer> label;
    std::optional<std::string> reasoning;

    bool operator==(const ActivationSample&) const = default;
};

inline constexpr double kProbMassSlack = 1e-6;

struct ActivationDataset {
    std::string model_id;
    std::size_t d = 0;
    std::vector<ActivationSample> rows;
    std::vector<LayerMatrix> layers;
    // Manifest keys this library does not interpret (answer-variant set,
    // hardware tag, ...), kept verbatim as a JSON object.
    std::string manifest_extra = "{}";

    std::size_t n() const { return rows.size(); }
    std::size_t num_layers() const { return layers.size(); }

    bool operator==(const ActivationDataset& other) const;
};

// Throws Error with a kind per violation: shape_mismatch, non_finite,
// out_of_range (probabilities), invalid_argument (d == 0, no layers,
// duplicate question/condition rows).
void validate(const ActivationDataset& ds);

ActivationDataset load_dataset(const std::string& dir);
void save_dataset(const ActivationDataset& ds, const std::string& dir);

// Copy of the given rows, in the given order, across all layers.
ActivationDataset select_rows(const ActivationDataset& ds, std::span<const std::size_t> rows);

// Keeps questions whose default-condition correct-answer mass is >= threshold,
// together with all their other-condition copies.
ActivationDataset filter_known(const ActivationDataset& ds, double threshold = 0.5);

// Sorted distinct conditions present in the dataset.
std::vector<PromptCondition> conditions_present(const ActivationDataset& ds);

// Rows `rows` of one layer, widened to double.
Eigen::MatrixXd gather(const ActivationDataset& ds, std::size_t layer,
                       std::span<const std::size_t> rows);

std::string layer_file_name(std::size_t layer);

}  // namespace truthprobe

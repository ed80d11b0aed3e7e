#pragma once

#include <cstdint>
#include <cstddef>
#include <vector>

#include "truthprobe/dataset.hpp"

namespace truthprobe {

struct SplitAssignment {
    std::uint64_t seed = 0;
    double ratio = 0.8;
    std::vector<std::size_t> train_rows;    // ascending
    std::vector<std::size_t> holdout_rows;  // ascending

    bool operator==(const SplitAssignment&) const = default;
};

// Train/hold-out split by base_id group. Groups are seed-shuffled, then the
// hold-out side is filled greedily up to (1 - ratio) * n rows, preferring at
// each step the group that keeps the hold-out label proportion closest to
// the overall one. A final swap pass puts both label classes on each side
// when the data allows it. Unlabeled rows count toward neither class.
//
// Throws Error{out_of_range} unless 0 < ratio < 1, Error{invalid_argument}
// with fewer than two groups.
SplitAssignment split(const ActivationDataset& ds, double ratio, std::uint64_t seed);

}  // namespace truthprobe

#include "truthprobe/split.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <string>

#include "truthprobe/error.hpp"

namespace truthprobe {

namespace {

struct Group {
    std::vector<std::size_t> rows;
    std::size_t positives = 0;
    std::size_t negatives = 0;
    bool holdout = false;

    std::size_t size() const { return rows.size(); }
};

struct Side {
    std::size_t rows = 0;
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

// Fisher-Yates over mt19937_64 so the permutation depends only on the seed,
// not on the standard library's distribution implementations.
void shuffle(std::vector<std::size_t>& v, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

double positive_fraction(std::size_t pos, std::size_t neg) {
    const auto labeled = pos + neg;
    return labeled == 0 ? 0.0 : static_cast<double>(pos) / static_cast<double>(labeled);
}

}  // namespace

SplitAssignment split(const ActivationDataset& ds, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) {
        throw Error(ErrorKind::out_of_range, "split ratio must lie strictly between 0 and 1");
    }

    std::vector<Group> groups;
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const auto& s = ds.rows[i];
        auto [it, inserted] = index.emplace(s.base_id, groups.size());
        if (inserted) groups.emplace_back();
        auto& g = groups[it->second];
        g.rows.push_back(i);
        if (s.label) (*s.label == Answer::yes ? g.positives : g.negatives) += 1;
    }
    if (groups.size() < 2) {
        throw Error(ErrorKind::invalid_argument,
                    "split needs at least 2 base_id groups, found " + std::to_string(groups.size()));
    }

    std::size_t total_pos = 0;
    std::size_t total_neg = 0;
    std::size_t largest = 0;
    for (const auto& g : groups) {
        total_pos += g.positives;
        total_neg += g.negatives;
        largest = std::max(largest, g.size());
    }
    const double overall = positive_fraction(total_pos, total_neg);
    const double n = static_cast<double>(ds.n());
    const double target = (1.0 - ratio) * n + 1e-9 * n;

    std::vector<std::size_t> order(groups.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order, seed);

    Side hold;
    std::size_t assigned = 0;
    auto take = [&](std::size_t g) {
        groups[g].holdout = true;
        hold.rows += groups[g].size();
        hold.positives += groups[g].positives;
        hold.negatives += groups[g].negatives;
        ++assigned;
    };

    // Greedy fill; the shuffled order breaks ties.
    while (assigned + 1 < groups.size()) {
        std::size_t best = groups.size();
        double best_dev = std::numeric_limits<double>::infinity();
        for (auto g : order) {
            const auto& grp = groups[g];
            if (grp.holdout) continue;
            if (static_cast<double>(hold.rows + grp.size()) > target) continue;
            const double dev = std::abs(
                positive_fraction(hold.positives + grp.positives, hold.negatives + grp.negatives) -
                overall);
            if (dev < best_dev) {
                best_dev = dev;
                best = g;
            }
        }
        if (best == groups.size()) break;
        take(best);
    }
    // Every group larger than the target: still hold out the first one.
    if (assigned == 0) take(order.front());

    // Repair: both label classes on each side, if a swap can achieve it
    // without moving the hold-out size further than one group from target.
    auto side_ok = [&](std::size_t pos, std::size_t neg) {
        return (total_pos == 0 || pos > 0) && (total_neg == 0 || neg > 0);
    };
    auto balanced = [&](const Side& h) {
        return side_ok(h.positives, h.negatives) &&
               side_ok(total_pos - h.positives, total_neg - h.negatives);
    };
    if (!balanced(hold)) {
        std::size_t best_h = 0, best_t = 0;
        double best_gap = std::numeric_limits<double>::infinity();
        for (auto gh : order) {
            if (!groups[gh].holdout) continue;
            for (auto gt : order) {
                if (groups[gt].holdout) continue;
                Side h = hold;
                h.rows = h.rows - groups[gh].size() + groups[gt].size();
                h.positives = h.positives - groups[gh].positives + groups[gt].positives;
                h.negatives = h.negatives - groups[gh].negatives + groups[gt].negatives;
                const double gap = std::abs(static_cast<double>(h.rows) - (1.0 - ratio) * n);
                if (!balanced(h) || gap > static_cast<double>(largest)) continue;
                if (gap < best_gap) {
                    best_gap = gap;
                    best_h = gh;
                    best_t = gt;
                }
            }
        }
        if (std::isfinite(best_gap)) {
            groups[best_h].holdout = false;
            groups[best_t].holdout = true;
        }
    }

    SplitAssignment out;
    out.seed = seed;
    out.ratio = ratio;
    for (const auto& g : groups) {
        auto& dst = g.holdout ? out.holdout_rows : out.train_rows;
        dst.insert(dst.end(), g.rows.begin(), g.rows.end());
    }
    std::sort(out.train_rows.begin(), out.train_rows.end());
    std::sort(out.holdout_rows.begin(), out.holdout_rows.end());
    return out;
}

}  // namespace truthprobe

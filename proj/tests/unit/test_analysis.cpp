#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>

#include "synthetic.hpp"
#include "truthprobe/analysis.hpp"
#include "truthprobe/error.hpp"

using namespace truthprobe;
namespace tt = truthprobe::testing;

namespace {

ActivationDataset paired_dataset(std::size_t groups, std::uint64_t seed,
                                 const std::vector<PromptCondition>& conditions = {PromptCondition::default_}) {
    std::mt19937_64 rng(seed);
    return tt::build_dataset(
        groups, 4, 2, conditions, rng,
        [&](std::size_t, const tt::RowSpec&) { return tt::random_normal(4, rng); }, {},
        {Entity::human, Entity::llm, Entity::self});
}

ProbeBundle lr_bundle(std::size_t d, std::size_t layer, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    LrProbe p;
    p.alpha = 0.1;
    p.beta = tt::random_normal(d, rng);
    p.layer = layer;
    ProbeBundle b;
    b.d = d;
    b.probes.push_back(p);
    SweepResult s;
    s.kind = ProbeKind::lr;
    s.best_layer = layer;
    b.sweeps.push_back(s);
    return b;
}

// Overwrite continuation probabilities so each assert row holds f(negate).
void set_pairs(ActivationDataset& ds, const std::function<std::pair<double, double>(std::size_t)>& gen) {
    std::map<std::pair<Entity, std::string>, std::size_t> seen;
    for (auto& r : ds.rows) {
        const auto k = seen.size();
        auto [it, fresh] = seen.emplace(std::make_pair(r.entity, r.base_id), k);
        const auto [pa, pn] = gen(it->second);
        r.yes_prob = r.polarity == Polarity::assert_ ? pa : pn;
        r.no_prob = 0.0;
    }
}

}  // namespace

TEST(Summarize, SingleRowGroupHasZeroSd) {
    auto ds = paired_dataset(1, 1);
    const auto b = lr_bundle(4, 0, 2);
    const std::array keys{GroupKey::entity, GroupKey::polarity};
    const auto cells = summarize(ds, b, keys);
    ASSERT_EQ(cells.size(), 3u * 2u * 2u);
    for (const auto& c : cells) {
        EXPECT_EQ(c.n, 1u);
        EXPECT_EQ(c.sd, 0.0);
        EXPECT_EQ(c.se, 0.0);
        EXPECT_FALSE(c.group.modality);
    }
    EXPECT_EQ(cells[0].source, kContinuationSource);
    EXPECT_EQ(cells[1].source, "lr");
}

TEST(Summarize, MeansAndSampleSd) {
    auto ds = paired_dataset(5, 3);
    const ProbeBundle empty;
    const std::array keys{GroupKey::entity, GroupKey::polarity};
    const auto cells = summarize(ds, empty, keys);
    std::map<std::pair<Entity, Polarity>, std::vector<double>> values;
    for (const auto& r : ds.rows) values[{r.entity, r.polarity}].push_back(r.yes_prob);
    ASSERT_EQ(cells.size(), values.size());
    for (const auto& c : cells) {
        const auto& v = values.at({*c.group.entity, *c.group.polarity});
        double m = 0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        double ss = 0;
        for (double x : v) ss += (x - m) * (x - m);
        const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
        EXPECT_NEAR(c.mean, m, 1e-12);
        EXPECT_NEAR(c.sd, sd, 1e-12);
        EXPECT_NEAR(c.se, sd / std::sqrt(static_cast<double>(v.size())), 1e-12);
    }
}

TEST(Summarize, PartitionsConserveCounts) {
    auto ds = paired_dataset(7, 4, tt::kThreeConditions);
    const auto b = lr_bundle(4, 1, 5);
    for (const auto& keys : std::vector<std::vector<GroupKey>>{
             {}, {GroupKey::entity}, {GroupKey::condition, GroupKey::polarity},
             {GroupKey::entity, GroupKey::polarity, GroupKey::modality, GroupKey::condition}}) {
        std::map<std::string, std::size_t> per_source;
        for (const auto& c : summarize(ds, b, keys)) {
            per_source[c.source] += c.n;
            EXPECT_GE(c.mean, 0.0);
            EXPECT_LE(c.mean, 1.0);
            EXPECT_GE(c.sd, 0.0);
        }
        EXPECT_EQ(per_source.size(), 2u);
        for (const auto& [src, n] : per_source) EXPECT_EQ(n, ds.n()) << src;
    }
}

TEST(Summarize, EmptyDatasetIsError) {
    ActivationDataset ds;
    ds.d = 4;
    ds.layers.assign(1, LayerMatrix(0, 4));
    const std::array keys{GroupKey::entity};
    EXPECT_THROW(summarize(ds, ProbeBundle{}, keys), Error);
}

TEST(Consistency, PerfectAntiSymmetry) {
    auto ds = paired_dataset(12, 6);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<double> pn(64);
    for (auto& v : pn) v = U(rng);
    set_pairs(ds, [&](std::size_t k) { return std::make_pair(1.0 - pn[k], pn[k]); });
    const auto rep = consistency(ds, ProbeBundle{});
    ASSERT_EQ(rep.fits.size(), 3u);
    for (const auto& f : rep.fits) {
        EXPECT_NEAR(f.slope, -1.0, 1e-9);
        EXPECT_NEAR(f.intercept, 1.0, 1e-9);
        EXPECT_NEAR(f.r2, 1.0, 1e-12);
        EXPECT_EQ(f.n_pairs(), 12u);
    }
    EXPECT_EQ(rep.unpaired_rows, 0u);
}

TEST(Consistency, ConstantAssertProbability) {
    auto ds = paired_dataset(6, 7);
    set_pairs(ds, [](std::size_t k) { return std::make_pair(0.4, 0.05 * static_cast<double>(k % 10)); });
    const auto rep = consistency(ds, ProbeBundle{});
    ASSERT_FALSE(rep.fits.empty());
    for (const auto& f : rep.fits) {
        EXPECT_EQ(f.slope, 0.0);
        EXPECT_EQ(f.r2, 0.0);
        EXPECT_DOUBLE_EQ(f.intercept, 0.4);
    }
}

TEST(Consistency, MatchesMomentOracle) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        auto ds = paired_dataset(3 + trial % 9, 100 + static_cast<std::uint64_t>(trial));
        std::vector<double> pa(64), pn(64);
        for (std::size_t k = 0; k < 64; ++k) { pa[k] = U(rng); pn[k] = U(rng); }
        set_pairs(ds, [&](std::size_t k) { return std::make_pair(pa[k], pn[k]); });
        const auto rep = consistency(ds, ProbeBundle{});
        for (const auto& f : rep.fits) {
            std::vector<double> x, y;
            for (const auto& [n, a] : f.points) { x.push_back(n); y.push_back(a); }
            const auto oracle = tt::moment_ols(x, y);
            EXPECT_NEAR(f.slope, oracle.slope, 1e-10);
            EXPECT_NEAR(f.intercept, oracle.intercept, 1e-10);
            EXPECT_GE(f.r2, 0.0);
            EXPECT_LE(f.r2, 1.0);
        }
    }
}

TEST(Consistency, UnpairedAndTooFewPairs) {
    auto ds = paired_dataset(2, 9);
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < ds.n(); ++i)
        if (!(ds.rows[i].entity == Entity::self && ds.rows[i].base_id == "q0" &&
              ds.rows[i].polarity == Polarity::negate))
            keep.push_back(i);
    ds = select_rows(ds, keep);
    const auto rep = consistency(ds, ProbeBundle{});
    EXPECT_TRUE(rep.fits.empty());
    EXPECT_EQ(rep.unpaired_rows, 1u);
    EXPECT_GE(rep.notices.size(), 4u);
}

TEST(Consistency, PairsOnlyWithinCondition) {
    auto ds = paired_dataset(5, 10, tt::kThreeConditions);
    const auto a = consistency(ds, ProbeBundle{}, PromptCondition::force_yes);
    for (const auto& f : a.fits) EXPECT_EQ(f.n_pairs(), 5u);
    EXPECT_EQ(a.condition, PromptCondition::force_yes);
}

TEST(Ols, Errors) {
    const std::vector<double> x{1.0, 1.0, 1.0}, y{0.0, 1.0, 2.0}, one{1.0};
    EXPECT_THROW(ols_fit(x, y), Error);
    EXPECT_THROW(ols_fit(one, one), Error);
}

TEST(ConditionShift, ProbeCellsInvariantToCondition) {
    auto ds = paired_dataset(6, 11, tt::kThreeConditions);
    // identical activations across the three condition copies
    std::map<std::tuple<std::string, Entity, Polarity>, std::size_t> first;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const auto& r = ds.rows[i];
        auto [it, fresh] = first.emplace(std::make_tuple(r.base_id, r.entity, r.polarity), i);
        if (!fresh)
            for (auto& layer : ds.layers) layer.row(static_cast<Eigen::Index>(i)) = layer.row(static_cast<Eigen::Index>(it->second));
        if (r.condition == PromptCondition::force_yes) { ds.rows[i].yes_prob = 0.99; ds.rows[i].no_prob = 0.0; }
    }
    const auto b = lr_bundle(4, 1, 12);
    const std::array keys{GroupKey::entity, GroupKey::polarity};
    const auto cells = condition_shift(ds, b, keys);
    std::map<std::tuple<Entity, Polarity>, std::vector<const SummaryCell*>> probe_cells;
    bool continuation_moved = false;
    for (const auto& c : cells) {
        ASSERT_TRUE(c.group.condition);
        if (c.source == "lr") probe_cells[{*c.group.entity, *c.group.polarity}].push_back(&c);
        if (c.source == kContinuationSource && *c.group.condition == PromptCondition::force_yes)
            continuation_moved |= c.mean > 0.98;
    }
    EXPECT_TRUE(continuation_moved);
    for (const auto& [key, v] : probe_cells) {
        ASSERT_EQ(v.size(), 3u);
        EXPECT_EQ(v[0]->mean, v[1]->mean);
        EXPECT_EQ(v[0]->mean, v[2]->mean);
        EXPECT_EQ(v[0]->sd, v[2]->sd);
    }
}

TEST(ConditionShift, OneConditionIsError) {
    auto ds = paired_dataset(3, 13);
    const std::array keys{GroupKey::entity};
    try {
        condition_shift(ds, ProbeBundle{}, keys);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
    }
}

TEST(Export, SummaryRoundTripWithinPrintPrecision) {
    auto ds = paired_dataset(4, 14, tt::kThreeConditions);
    const auto b = lr_bundle(4, 0, 15);
    const std::array keys{GroupKey::entity, GroupKey::condition};
    const auto cells = summarize(ds, b, keys);
    std::ostringstream out;
    write_summary_csv(out, cells);
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "entity,polarity,modality,condition,source,mean,sd,se,n");
    std::istringstream in(out.str());
    const auto back = read_summary_csv(in);
    ASSERT_EQ(back.size(), cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        EXPECT_EQ(back[i].group, cells[i].group);
        EXPECT_EQ(back[i].source, cells[i].source);
        EXPECT_EQ(back[i].n, cells[i].n);
        EXPECT_NEAR(back[i].mean, cells[i].mean, 5e-6 * std::max(1.0, std::abs(cells[i].mean)));
        EXPECT_NEAR(back[i].sd, cells[i].sd, 5e-6 * std::max(1.0, cells[i].sd));
    }
}

TEST(Export, EmptyListWritesHeaderOnly) {
    tt::TempDir dir("export");
    const std::vector<SummaryCell> none;
    export_report(none, dir.str("s.csv"), "csv");
    std::ifstream in(dir.path() / "s.csv");
    std::string all((std::istreambuf_iterator<char>(in)), {});
    EXPECT_EQ(all, "entity,polarity,modality,condition,source,mean,sd,se,n\n");

    ConsistencyReport rep;
    export_report(rep, dir.str("c.csv"), "csv");
    std::ifstream cin(dir.path() / "c.csv");
    std::string call((std::istreambuf_iterator<char>(cin)), {});
    EXPECT_EQ(call, "entity,source,slope,intercept,r2,n_pairs\n");
}

TEST(Export, UnknownFormatAndBadPath) {
    tt::TempDir dir("export_bad");
    const std::vector<SummaryCell> none;
    try {
        export_report(none, dir.str("s.txt"), "xml");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::unknown_enum);
    }
    EXPECT_THROW(export_report(none, dir.str("missing/dir/s.csv"), "csv"), Error);
}

TEST(Export, JsonMirrorsCsv) {
    auto ds = paired_dataset(5, 16);
    const auto rep = consistency(ds, lr_bundle(4, 0, 17));
    std::ostringstream csv, json;
    write_consistency_csv(csv, rep.fits);
    write_consistency_json(json, rep);
    EXPECT_NE(json.str().find("\"slope\""), std::string::npos);
    EXPECT_NE(json.str().find("\"points\""), std::string::npos);
    std::size_t lines = 0;
    for (char c : csv.str()) lines += c == '\n';
    EXPECT_EQ(lines, rep.fits.size() + 1);
}

TEST(Export, FloatFormatting) {
    EXPECT_EQ(format_float(0.123456789), "0.123457");
    EXPECT_EQ(format_float(1.0), "1");
    EXPECT_EQ(parse_group_keys("entity,polarity").size(), 2u);
    EXPECT_THROW(parse_group_key("colour"), Error);
}

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <functional>
#include <fstream>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

#include "synthetic.hpp"
#include "truthprobe/dataset.hpp"
#include "truthprobe/error.hpp"

using namespace truthprobe;
namespace tt = truthprobe::testing;
using truthprobe::testing::TempDir;
namespace fs = std::filesystem;

namespace {

ActivationDataset small_dataset(std::size_t n_groups = 1, std::size_t d = 8, std::size_t L = 2) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> N(0.0, 1.0);
    auto ds = tt::build_dataset(
        n_groups, d, L, {PromptCondition::default_}, rng,
        [&](std::size_t, const tt::RowSpec&) { return tt::random_normal(d, rng); },
        {}, {Entity::human, Entity::self});
    ds.rows[0].reasoning = "first line\nsecond \"quoted\" line";
    ds.rows[1].label.reset();
    return ds;
}

ErrorKind kind_thrown(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no truthprobe::Error thrown";
    return ErrorKind::io;
}

nlohmann::json read_manifest(const TempDir& dir) {
    std::ifstream in(dir.path() / "manifest.json");
    return nlohmann::json::parse(in);
}

void write_manifest(const TempDir& dir, const nlohmann::json& j) {
    std::ofstream out(dir.path() / "manifest.json", std::ios::trunc);
    out << j.dump(2);
}

}  // namespace

TEST(Dataset, RoundTripIsBitExact) {
    auto ds = small_dataset();
    ASSERT_EQ(ds.n(), 4u);
    // Values that would not survive a decimal round trip.
    ds.layers[1](2, 3) = std::nextafter(1.0f, 2.0f);
    ds.layers[0](0, 0) = std::numeric_limits<float>::denorm_min();
    ds.layers[0](1, 1) = -0.0f;
    TempDir dir("roundtrip");
    save_dataset(ds, dir.str());
    const auto back = load_dataset(dir.str());
    EXPECT_TRUE(back == ds);
    EXPECT_EQ(back.rows[0].reasoning, ds.rows[0].reasoning);
    EXPECT_FALSE(back.rows[1].label);
    EXPECT_TRUE(std::signbit(back.layers[0](1, 1)));
}

TEST(Dataset, LayerFilesAreRawFloat32) {
    const auto ds = small_dataset();
    TempDir dir("raw");
    save_dataset(ds, dir.str());
    EXPECT_EQ(fs::file_size(dir.path() / "layer_0.f32"), 4u * 8u * 4u);
    EXPECT_EQ(fs::file_size(dir.path() / "layer_1.f32"), 4u * 8u * 4u);
    std::ifstream in(dir.path() / "layer_1.f32", std::ios::binary);
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    const std::uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t(b[3]) << 24);
    float v;
    std::memcpy(&v, &bits, 4);
    EXPECT_EQ(v, ds.layers[1](0, 0));
}

TEST(Dataset, EmptyDatasetRoundTrips) {
    ActivationDataset ds;
    ds.model_id = "m";
    ds.d = 4;
    ds.layers.assign(2, LayerMatrix(0, 4));
    TempDir dir("empty");
    save_dataset(ds, dir.str());
    const auto back = load_dataset(dir.str());
    EXPECT_EQ(back.n(), 0u);
    EXPECT_EQ(back.num_layers(), 2u);
}

TEST(Dataset, ZeroWidthRejected) {
    ActivationDataset ds;
    ds.model_id = "m";
    ds.d = 0;
    ds.layers.assign(1, LayerMatrix(0, 0));
    TempDir dir("d0");
    EXPECT_EQ(kind_thrown([&] { save_dataset(ds, dir.str()); }), ErrorKind::invalid_argument);
}

TEST(Dataset, TruncatedLayerIsShapeMismatch) {
    TempDir dir("trunc");
    save_dataset(small_dataset(), dir.str());
    fs::resize_file(dir.path() / "layer_1.f32", 4 * 8 * 4 - 4);
    EXPECT_EQ(kind_thrown([&] { load_dataset(dir.str()); }), ErrorKind::shape_mismatch);
}

TEST(Dataset, MissingLayerFile) {
    TempDir dir("missing");
    save_dataset(small_dataset(), dir.str());
    fs::remove(dir.path() / "layer_1.f32");
    try {
        load_dataset(dir.str());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::missing_file);
        EXPECT_NE(std::string(e.what()).find("layer_1.f32"), std::string::npos);
    }
    EXPECT_EQ(kind_thrown([&] { load_dataset(dir.str("nowhere")); }), ErrorKind::missing_file);
}

TEST(Dataset, ProbabilityOutOfRange) {
    TempDir dir("prob");
    save_dataset(small_dataset(), dir.str());
    auto j = read_manifest(dir);
    j["rows"][0]["yes_prob"] = 1.2;
    write_manifest(dir, j);
    EXPECT_EQ(kind_thrown([&] { load_dataset(dir.str()); }), ErrorKind::out_of_range);

    j["rows"][0]["yes_prob"] = 0.7;
    j["rows"][0]["no_prob"] = 0.4;
    write_manifest(dir, j);
    EXPECT_EQ(kind_thrown([&] { load_dataset(dir.str()); }), ErrorKind::out_of_range);

    j["rows"][0]["no_prob"] = 0.3 + 5e-7;
    write_manifest(dir, j);
    EXPECT_NO_THROW(load_dataset(dir.str()));
}

TEST(Dataset, UnknownEnumAndBadLabel) {
    TempDir dir("enum");
    save_dataset(small_dataset(), dir.str());
    auto j = read_manifest(dir);
    auto bad = j;
    bad["rows"][2]["entity"] = "robot";
    write_manifest(dir, bad);
    EXPECT_EQ(kind_thrown([&] { load_dataset(dir.str()); }), ErrorKind::unknown_enum);

    bad = j;
    bad["rows"][0]["label"] = 2;
    write_manifest(dir, bad);
    EXPECT_EQ(kind_thrown([&] { load_dataset(dir.str()); }), ErrorKind::out_of_range);

    bad = j;
    bad["n"] = 5;
    write_manifest(dir, bad);
    EXPECT_EQ(kind_thrown([&] { load_dataset(dir.str()); }), ErrorKind::shape_mismatch);

    bad = j;
    bad["rows"][0].erase("condition");
    write_manifest(dir, bad);
    EXPECT_EQ(kind_thrown([&] { load_dataset(dir.str()); }), ErrorKind::format);
}

TEST(Dataset, NonFiniteActivation) {
    auto ds = small_dataset();
    ds.layers[0](1, 2) = std::numeric_limits<float>::quiet_NaN();
    EXPECT_EQ(kind_thrown([&] { validate(ds); }), ErrorKind::non_finite);

    TempDir dir("nan");
    save_dataset(small_dataset(), dir.str());
    std::fstream f(dir.path() / "layer_0.f32", std::ios::in | std::ios::out | std::ios::binary);
    const float inf = std::numeric_limits<float>::infinity();
    f.seekp(12);
    f.write(reinterpret_cast<const char*>(&inf), 4);
    f.close();
    EXPECT_EQ(kind_thrown([&] { load_dataset(dir.str()); }), ErrorKind::non_finite);
}

TEST(Dataset, DuplicateRowRejected) {
    auto ds = small_dataset();
    ds.rows[1] = ds.rows[0];
    EXPECT_EQ(kind_thrown([&] { validate(ds); }), ErrorKind::invalid_argument);
}

TEST(Dataset, ExtraManifestKeysSurvive) {
    auto ds = small_dataset();
    ds.manifest_extra = R"({"extractor":{"prompt":"p","layers":"all"}})";
    TempDir dir("extra");
    save_dataset(ds, dir.str());
    const auto back = load_dataset(dir.str());
    EXPECT_EQ(nlohmann::json::parse(back.manifest_extra), nlohmann::json::parse(ds.manifest_extra));
}

// ---- filter_known ----

namespace {

// One question, three conditions, with the default-row probabilities given.
ActivationDataset one_question(Answer label, double yes, double no) {
    std::mt19937_64 rng(1);
    auto ds = tt::build_dataset(
        1, 2, 1, tt::kThreeConditions, rng,
        [&](std::size_t, const tt::RowSpec&) { return Eigen::VectorXd::Zero(2).eval(); });
    for (auto& r : ds.rows) {
        // force the assert row's label, its negation is the complement
        r.label = r.polarity == Polarity::assert_ ? label : complement(label);
        const bool is_assert = r.polarity == Polarity::assert_;
        r.yes_prob = is_assert ? yes : no;
        r.no_prob = is_assert ? no : yes;
        if (r.condition == PromptCondition::force_yes) { r.yes_prob = 0.99; r.no_prob = 0.0; }
        if (r.condition == PromptCondition::force_no) { r.yes_prob = 0.0; r.no_prob = 0.99; }
    }
    return ds;
}

std::size_t count_assert(const ActivationDataset& ds) {
    std::size_t c = 0;
    for (const auto& r : ds.rows) c += r.polarity == Polarity::assert_;
    return c;
}

}  // namespace

TEST(FilterKnown, KeepsKnownQuestionWithCopies) {
    const auto ds = one_question(Answer::yes, 0.6, 0.3);
    const auto kept = filter_known(ds, 0.5);
    EXPECT_EQ(count_assert(kept), 3u);  // default + both force copies
}

TEST(FilterKnown, DropsUnknownQuestionWithCopies) {
    const auto ds = one_question(Answer::no, 0.5, 0.4);
    const auto kept = filter_known(ds, 0.5);
    EXPECT_EQ(count_assert(kept), 0u);
    for (const auto& r : kept.rows) EXPECT_EQ(r.polarity, Polarity::negate);
}

TEST(FilterKnown, ThresholdZeroIsIdentity) {
    const auto ds = one_question(Answer::no, 0.9, 0.0);
    EXPECT_TRUE(filter_known(ds, 0.0) == ds);
}

TEST(FilterKnown, IdempotentAndMonotone) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto ds = tt::build_dataset(
        40, 3, 1, tt::kThreeConditions, rng,
        [&](std::size_t, const tt::RowSpec&) { return tt::random_normal(3, rng); },
        [&](const tt::RowSpec&) {
            const double a = U(rng);
            return std::array<double, 2>{a, (1.0 - a) * U(rng)};
        });
    std::size_t previous = ds.n() + 1;
    for (double t : {0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0}) {
        const auto once = filter_known(ds, t);
        EXPECT_TRUE(filter_known(once, t) == once) << "threshold " << t;
        EXPECT_LE(once.n(), previous);
        previous = once.n();
        if (t >= 0.5) {
            // higher threshold keeps a subset of the lower one
            const auto lower = filter_known(ds, t - 0.2);
            EXPECT_TRUE(filter_known(lower, t) == once);
        }
    }
}

TEST(FilterKnown, Errors) {
    auto ds = one_question(Answer::yes, 0.6, 0.3);
    EXPECT_EQ(kind_thrown([&] { filter_known(ds, 1.5); }), ErrorKind::out_of_range);
    EXPECT_EQ(kind_thrown([&] { filter_known(ds, -0.1); }), ErrorKind::out_of_range);

    auto unlabeled = ds;
    unlabeled.rows[3].label.reset();
    EXPECT_EQ(kind_thrown([&] { filter_known(unlabeled, 0.5); }), ErrorKind::invalid_argument);

    std::vector<std::size_t> no_default;
    for (std::size_t i = 0; i < ds.n(); ++i)
        if (ds.rows[i].condition != PromptCondition::default_) no_default.push_back(i);
    const auto orphan = select_rows(ds, no_default);
    EXPECT_EQ(kind_thrown([&] { filter_known(orphan, 0.5); }), ErrorKind::invalid_argument);
}

#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "truthprobe/error.hpp"
#include "truthprobe/question.hpp"

using namespace truthprobe;

TEST(Question, RendersSelfAssertAndNegate) {
    EXPECT_EQ(render_question("{subject} have subjective experiences", Entity::self),
              "Is it true that you have subjective experiences?");
    EXPECT_EQ(render_question("{subject} do not have subjective experiences", Entity::self),
              "Is it true that you do not have subjective experiences?");
    EXPECT_EQ(render_question("{subject} can feel pain?", Entity::llm),
              "Is it true that large language models can feel pain?");
    EXPECT_EQ(render_question("{subject} dream", Entity::human),
              "Is it true that humans dream?");
}

TEST(Question, TemplateErrors) {
    EXPECT_THROW(render_question("have feelings", Entity::self), Error);
    EXPECT_THROW(render_question("{subject}", Entity::self), Error);
    EXPECT_THROW(render_question("  {subject} ?", Entity::self), Error);
    EXPECT_THROW(render_question("{subject} and {subject}", Entity::self), Error);
    try {
        render_question("{subject}", Entity::human);
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::format);
    }
}

namespace {

std::vector<BaseQuestion> make_battery(std::size_t n) {
    std::vector<BaseQuestion> out;
    for (std::size_t i = 0; i < n; ++i) {
        BaseQuestion b;
        b.base_id = "b" + std::to_string(i);
        b.modality = Modality::generic;
        b.assert_template = "{subject} like item " + std::to_string(i);
        b.negate_template = "{subject} do not like item " + std::to_string(i);
        out.push_back(b);
    }
    return out;
}

}  // namespace

TEST(Question, ExpansionCount) {
    const auto bases = make_battery(51);
    const auto q = expand_questions(bases);
    EXPECT_EQ(q.size(), 51u * 3u * 2u);

    std::set<std::string> texts;
    for (const auto& r : q) texts.insert(r.text);
    EXPECT_EQ(texts.size(), q.size());
    EXPECT_NO_THROW(validate_questions(q));

    const std::array subset{Entity::self};
    EXPECT_EQ(expand_questions(bases, subset).size(), 102u);
}

TEST(Question, NegationLabelIsComplement) {
    BaseQuestion b;
    b.base_id = "fact1";
    b.modality = Modality::training;
    b.assert_template = "{subject} breathe oxygen";
    b.negate_template = "{subject} do not breathe oxygen";
    b.labels = {Answer::yes, Answer::no, Answer::no};
    const std::vector<BaseQuestion> bases{b};
    const auto q = expand_questions(bases);
    ASSERT_EQ(q.size(), 6u);
    for (std::size_t i = 0; i < q.size(); i += 2) {
        EXPECT_EQ(q[i].polarity, Polarity::assert_);
        EXPECT_EQ(q[i + 1].polarity, Polarity::negate);
        ASSERT_TRUE(q[i].label && q[i + 1].label);
        EXPECT_EQ(*q[i + 1].label, complement(*q[i].label));
    }
    EXPECT_EQ(*q[0].label, Answer::yes);
    EXPECT_EQ(q[0].entity, Entity::human);

    b.labels = {Answer::yes, std::nullopt, Answer::no};
    const std::vector<BaseQuestion> missing{b};
    EXPECT_THROW(expand_questions(missing), Error);
}

TEST(Question, DuplicateBaseIdRejected) {
    auto bases = make_battery(2);
    bases[1].base_id = bases[0].base_id;
    EXPECT_THROW(expand_questions(bases), Error);
}

TEST(Question, ValidateRejectsNonComplementLabels) {
    BaseQuestion b;
    b.base_id = "t";
    b.modality = Modality::training;
    b.assert_template = "{subject} x";
    b.negate_template = "{subject} do not x";
    b.labels = {Answer::yes, Answer::yes, Answer::yes};
    const std::vector<BaseQuestion> bases{b};
    auto q = expand_questions(bases);
    q[1].label = Answer::yes;
    EXPECT_THROW(validate_questions(q), Error);
}

TEST(Question, BatteryCsvAndRoundTrip) {
    std::istringstream in(
        "base_id,modality,subject_assert,subject_negate,label_human,label_llm,label_self\n"
        "g1,generic,{subject} have subjective experiences,{subject} do not have subjective "
        "experiences,,,\n"
        "t1,training,{subject} are made of cells,{subject} are not made of cells,yes,no,no\n");
    const auto bases = read_battery(in);
    ASSERT_EQ(bases.size(), 2u);
    EXPECT_EQ(bases[1].label_for(Entity::human), Answer::yes);
    EXPECT_FALSE(bases[0].label_for(Entity::human));

    const auto q = expand_questions(bases);
    std::ostringstream out;
    write_questions(out, q);
    std::istringstream back(out.str());
    EXPECT_EQ(read_questions(back), q);
}

TEST(Question, BatteryMissingColumn) {
    std::istringstream in("base_id,modality,subject_assert\n");
    try {
        read_battery(in);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::format);
        EXPECT_NE(std::string(e.what()).find("subject_negate"), std::string::npos);
    }
}

TEST(Question, BatteryBadModalityNamesLine) {
    std::istringstream in(
        "base_id,modality,subject_assert,subject_negate,label_human,label_llm,label_self\n"
        "a,generic,{subject} x,{subject} not x,,,\n"
        "b,tactile,{subject} y,{subject} not y,,,\n");
    try {
        read_battery(in);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
}

TEST(Question, EmptyBatteryExpandsToNothing) {
    std::istringstream in(
        "base_id,modality,subject_assert,subject_negate,label_human,label_llm,label_self\n");
    const auto bases = read_battery(in);
    EXPECT_TRUE(bases.empty());
    EXPECT_TRUE(expand_questions(bases).empty());
}

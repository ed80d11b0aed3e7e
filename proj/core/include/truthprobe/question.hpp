#pragma once

// Question battery: base templates and their expansion into entity x polarity
// variants ("Is it true that you have ...?" / "... you do not have ...?").

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "truthprobe/types.hpp"

namespace truthprobe {

inline constexpr std::string_view kSubjectPlaceholder = "{subject}";
inline constexpr std::string_view kQuestionPrefix = "Is it true that ";

// One row of a battery CSV. Templates are clauses containing {subject},
// e.g. "{subject} have subjective experiences". Labels are the true answer to
// the assert form, per entity; the negate form gets the complement.
struct BaseQuestion {
    std::string base_id;
    Modality modality = Modality::generic;
    std::string assert_template;
    std::string negate_template;
    std::array<std::optional<Answer>, 3> labels{};  // indexed by Entity

    std::optional<Answer> label_for(Entity e) const { return labels[static_cast<int>(e)]; }
};

struct QuestionRecord {
    std::string base_id;
    Entity entity = Entity::human;
    Polarity polarity = Polarity::assert_;
    Modality modality = Modality::generic;
    std::string text;
    std::optional<Answer> label;

    bool operator==(const QuestionRecord&) const = default;
};

// Substitute the entity's subject phrase into a clause template and wrap it
// as a yes/no question. Throws Error{format} on a missing placeholder or an
// empty predicate.
std::string render_question(std::string_view clause_template, Entity entity);

// Emits, per base, every requested entity in order, assert then negate.
std::vector<QuestionRecord> expand_questions(std::span<const BaseQuestion> bases,
                                             std::span<const Entity> entities = kAllEntities);

// Checks the record-level invariants: training rows are labeled, and paired
// assert/negate labels are complements.
void validate_questions(std::span<const QuestionRecord> records);

// Battery CSV: base_id,modality,subject_assert,subject_negate,label_human,label_llm,label_self
std::vector<BaseQuestion> read_battery(std::istream& in);
std::vector<BaseQuestion> read_battery_file(const std::string& path);

// Expanded CSV consumed by the extractor: base_id,entity,polarity,modality,text,label
void write_questions(std::ostream& out, std::span<const QuestionRecord> records);
std::vector<QuestionRecord> read_questions(std::istream& in);

}  // namespace truthprobe

#pragma once

// Enumerations shared by the question battery, the activation dataset and
// the analysis tables, with their canonical on-disk spellings.

#include <array>
#include <string_view>

namespace truthprobe {

enum class Entity { human, llm, self };
enum class Polarity { assert_, negate };
enum class Modality { generic, emotional, visual, other, training };
enum class PromptCondition { default_, force_yes, force_no };
enum class Answer { no = 0, yes = 1 };

inline constexpr std::array kAllEntities{Entity::human, Entity::llm, Entity::self};
inline constexpr std::array kAllPolarities{Polarity::assert_, Polarity::negate};
inline constexpr std::array kAllModalities{Modality::generic, Modality::emotional, Modality::visual,
                                           Modality::other, Modality::training};
inline constexpr std::array kAllConditions{PromptCondition::default_, PromptCondition::force_yes,
                                           PromptCondition::force_no};

std::string_view to_string(Entity v);
std::string_view to_string(Polarity v);
std::string_view to_string(Modality v);
std::string_view to_string(PromptCondition v);
std::string_view to_string(Answer v);

// Throw Error{unknown_enum} on anything but the canonical spelling.
Entity parse_entity(std::string_view s);
Polarity parse_polarity(std::string_view s);
Modality parse_modality(std::string_view s);
PromptCondition parse_condition(std::string_view s);
Answer parse_answer(std::string_view s);

// The noun phrase substituted for the subject placeholder.
std::string_view subject_phrase(Entity e);

// +1 for assertions, -1 for negations.
inline int polarity_sign(Polarity p) { return p == Polarity::assert_ ? 1 : -1; }

inline Answer complement(Answer a) { return a == Answer::yes ? Answer::no : Answer::yes; }

}  // namespace truthprobe

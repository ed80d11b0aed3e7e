#include "truthprobe/types.hpp"

#include <string>

#include "truthprobe/error.hpp"

namespace truthprobe {

namespace {

template <typename E, std::size_t N>
E parse_from(std::string_view s, const std::array<E, N>& values, const char* what) {
    for (E v : values) {
        if (to_string(v) == s) return v;
    }
    throw Error(ErrorKind::unknown_enum,
                std::string("unknown ") + what + " value '" + std::string(s) + "'");
}

}  // namespace

std::string_view to_string(Entity v) {
    switch (v) {
        case Entity::human: return "human";
        case Entity::llm: return "llm";
        case Entity::self: return "self";
    }
    return "?";
}

std::string_view to_string(Polarity v) {
    return v == Polarity::assert_ ? "assert" : "negate";
}

std::string_view to_string(Modality v) {
    switch (v) {
        case Modality::generic: return "generic";
        case Modality::emotional: return "emotional";
        case Modality::visual: return "visual";
        case Modality::other: return "other";
        case Modality::training: return "training";
    }
    return "?";
}

std::string_view to_string(PromptCondition v) {
    switch (v) {
        case PromptCondition::default_: return "default";
        case PromptCondition::force_yes: return "force_yes";
        case PromptCondition::force_no: return "force_no";
    }
    return "?";
}

std::string_view to_string(Answer v) { return v == Answer::yes ? "yes" : "no"; }

Entity parse_entity(std::string_view s) { return parse_from(s, kAllEntities, "entity"); }
Polarity parse_polarity(std::string_view s) { return parse_from(s, kAllPolarities, "polarity"); }
Modality parse_modality(std::string_view s) { return parse_from(s, kAllModalities, "modality"); }
PromptCondition parse_condition(std::string_view s) {
    return parse_from(s, kAllConditions, "condition");
}
Answer parse_answer(std::string_view s) {
    return parse_from(s, std::array{Answer::no, Answer::yes}, "answer");
}

std::string_view subject_phrase(Entity e) {
    switch (e) {
        case Entity::human: return "humans";
        case Entity::llm: return "large language models";
        case Entity::self: return "you";
    }
    return "";
}

}  // namespace truthprobe

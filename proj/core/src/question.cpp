#include "truthprobe/question.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <utility>

#include "truthprobe/csv.hpp"
#include "truthprobe/error.hpp"

namespace truthprobe {

namespace {

constexpr std::array<std::string_view, 7> kBatteryHeader{
    "base_id", "modality", "subject_assert", "subject_negate",
    "label_human", "label_llm", "label_self"};

constexpr std::array<std::string_view, 6> kQuestionHeader{
    "base_id", "entity", "polarity", "modality", "text", "label"};

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::optional<Answer> parse_optional_answer(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    return parse_answer(s);
}

template <std::size_t N>
std::vector<std::size_t> resolve_columns(const csv::Table& table,
                                         const std::array<std::string_view, N>& names) {
    std::vector<std::size_t> idx;
    for (auto name : names) {
        auto col = table.column(name);
        if (!col) throw Error(ErrorKind::format, "line 1: missing column '" + std::string(name) + "'");
        idx.push_back(*col);
    }
    return idx;
}

std::string at_line(std::size_t line, const std::string& msg) {
    return "line " + std::to_string(line) + ": " + msg;
}

}  // namespace

std::string render_question(std::string_view clause_template, Entity entity) {
    const auto pos = clause_template.find(kSubjectPlaceholder);
    if (pos == std::string_view::npos) {
        throw Error(ErrorKind::format, "template '" + std::string(clause_template) +
                                           "' lacks the " + std::string(kSubjectPlaceholder) +
                                           " placeholder");
    }
    std::string clause(clause_template);
    clause.replace(pos, kSubjectPlaceholder.size(), subject_phrase(entity));
    if (clause.find(kSubjectPlaceholder) != std::string::npos) {
        throw Error(ErrorKind::format, "template '" + std::string(clause_template) +
                                           "' repeats the subject placeholder");
    }

    std::string rest(clause_template);
    rest.erase(pos, kSubjectPlaceholder.size());
    if (trim(rest).empty() || trim(rest) == "?") {
        throw Error(ErrorKind::format, "template '" + std::string(clause_template) +
                                           "' has an empty predicate");
    }

    std::string_view body = trim(clause);
    while (!body.empty() && (body.back() == '?' || body.back() == '.')) body.remove_suffix(1);
    return std::string(kQuestionPrefix) + std::string(trim(body)) + "?";
}

std::vector<QuestionRecord> expand_questions(std::span<const BaseQuestion> bases,
                                             std::span<const Entity> entities) {
    std::vector<QuestionRecord> out;
    out.reserve(bases.size() * entities.size() * 2);
    std::set<std::string> seen;
    for (const auto& base : bases) {
        if (base.base_id.empty()) throw Error(ErrorKind::format, "empty base_id");
        if (!seen.insert(base.base_id).second) {
            throw Error(ErrorKind::format, "duplicate base_id '" + base.base_id + "'");
        }
        for (Entity e : entities) {
            const auto label = base.label_for(e);
            if (base.modality == Modality::training && !label) {
                throw Error(ErrorKind::format, "training question '" + base.base_id +
                                                   "' has no label for entity " +
                                                   std::string(to_string(e)));
            }
            out.push_back({base.base_id, e, Polarity::assert_, base.modality,
                           render_question(base.assert_template, e), label});
            out.push_back({base.base_id, e, Polarity::negate, base.modality,
                           render_question(base.negate_template, e),
                           label ? std::optional(complement(*label)) : std::nullopt});
        }
    }
    return out;
}

void validate_questions(std::span<const QuestionRecord> records) {
    std::map<std::pair<std::string, Entity>, std::array<const QuestionRecord*, 2>> pairs;
    for (const auto& r : records) {
        if (r.modality == Modality::training && !r.label) {
            throw Error(ErrorKind::invalid_argument,
                        "training question '" + r.base_id + "' is unlabeled");
        }
        auto& slot = pairs[{r.base_id, r.entity}][r.polarity == Polarity::assert_ ? 0 : 1];
        if (slot) {
            throw Error(ErrorKind::invalid_argument,
                        "duplicate question " + r.base_id + "/" + std::string(to_string(r.entity)) +
                            "/" + std::string(to_string(r.polarity)));
        }
        slot = &r;
    }
    for (const auto& [key, pair] : pairs) {
        if (pair[0] && pair[1] && pair[0]->label && pair[1]->label &&
            *pair[0]->label == *pair[1]->label) {
            throw Error(ErrorKind::invalid_argument,
                        "question '" + key.first + "' (" + std::string(to_string(key.second)) +
                            "): assert and negate labels are not complements");
        }
    }
}

std::vector<BaseQuestion> read_battery(std::istream& in) {
    const auto table = csv::read(in);
    std::vector<BaseQuestion> out;
    if (table.header.empty()) return out;
    const auto col = resolve_columns(table, kBatteryHeader);
    for (const auto& rec : table.records) {
        const auto& f = rec.fields;
        try {
            BaseQuestion b;
            b.base_id = std::string(trim(f[col[0]]));
            b.modality = parse_modality(trim(f[col[1]]));
            b.assert_template = f[col[2]];
            b.negate_template = f[col[3]];
            for (int e = 0; e < 3; ++e) b.labels[e] = parse_optional_answer(f[col[4 + e]]);
            // Surface template errors here, where the line number is known.
            render_question(b.assert_template, Entity::self);
            render_question(b.negate_template, Entity::self);
            out.push_back(std::move(b));
        } catch (const Error& err) {
            throw Error(ErrorKind::format, at_line(rec.line, err.what()));
        }
    }
    return out;
}

std::vector<BaseQuestion> read_battery_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::missing_file, "cannot open battery " + path);
    return read_battery(in);
}

void write_questions(std::ostream& out, std::span<const QuestionRecord> records) {
    csv::write_row(out, {kQuestionHeader.begin(), kQuestionHeader.end()});
    for (const auto& r : records) {
        csv::write_row(out, {r.base_id, std::string(to_string(r.entity)),
                             std::string(to_string(r.polarity)), std::string(to_string(r.modality)),
                             r.text, r.label ? std::string(to_string(*r.label)) : std::string()});
    }
}

std::vector<QuestionRecord> read_questions(std::istream& in) {
    const auto table = csv::read(in);
    std::vector<QuestionRecord> out;
    if (table.header.empty()) return out;
    const auto col = resolve_columns(table, kQuestionHeader);
    for (const auto& rec : table.records) {
        const auto& f = rec.fields;
        try {
            out.push_back({f[col[0]], parse_entity(f[col[1]]), parse_polarity(f[col[2]]),
                           parse_modality(f[col[3]]), f[col[4]], parse_optional_answer(f[col[5]])});
        } catch (const Error& err) {
            throw Error(ErrorKind::format, at_line(rec.line, err.what()));
        }
    }
    return out;
}

}  // namespace truthprobe

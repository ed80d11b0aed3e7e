#include "truthprobe/csv.hpp"

#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>

#include "truthprobe/error.hpp"

namespace truthprobe::csv {

std::optional<std::size_t> Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    return std::nullopt;
}

namespace {

std::vector<Record> parse(std::string_view text) {
    std::vector<Record> out;
    if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);

    Record rec;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;
    rec.line = 1;

    auto end_field = [&] {
        rec.fields.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        end_field();
        // A bare empty line is not a record.
        if (!(rec.fields.size() == 1 && rec.fields[0].empty())) out.push_back(std::move(rec));
        rec = Record{};
        rec.line = line;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field_started && !field.empty()) {
                    throw Error(ErrorKind::format,
                                "line " + std::to_string(line) + ": stray quote inside field");
                }
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                end_field();
                break;
            case '\r':
                break;
            case '\n':
                ++line;
                end_record();
                break;
            default:
                field.push_back(c);
                field_started = true;
        }
    }
    if (in_quotes) {
        throw Error(ErrorKind::format,
                    "line " + std::to_string(rec.line) + ": unterminated quoted field");
    }
    if (field_started || !rec.fields.empty()) end_record();
    return out;
}

}  // namespace

Table read(std::istream& in) {
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    auto records = parse(text);
    Table table;
    if (records.empty()) return table;
    table.header = std::move(records.front().fields);
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].fields.size() != table.header.size()) {
            throw Error(ErrorKind::format,
                        "line " + std::to_string(records[i].line) + ": expected " +
                            std::to_string(table.header.size()) + " fields, got " +
                            std::to_string(records[i].fields.size()));
        }
        table.records.push_back(std::move(records[i]));
    }
    return table;
}

Table read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::missing_file, "cannot open " + path);
    return read(in);
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << escape(fields[i]);
    }
    out << '\n';
}

}  // namespace truthprobe::csv

#pragma once

// Minimal RFC 4180 reader/writer: quoted fields, doubled quotes, embedded
// commas and newlines, CRLF, optional UTF-8 BOM.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace truthprobe::csv {

struct Record {
    std::vector<std::string> fields;
    std::size_t line = 0;  // 1-based line where the record starts
};

struct Table {
    std::vector<std::string> header;
    std::vector<Record> records;

    // Column index of `name` in the header, if present.
    std::optional<std::size_t> column(std::string_view name) const;
};

// Throws Error{format} on an unterminated quote or a record whose field
// count differs from the header's.
Table read(std::istream& in);
Table read_file(const std::string& path);

void write_row(std::ostream& out, const std::vector<std::string>& fields);
std::string escape(std::string_view field);

}  // namespace truthprobe::csv

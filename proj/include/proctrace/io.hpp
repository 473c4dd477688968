// SPDX-License-Identifier: Apache-2.0

// File helpers shared by the command layer: whole-file reads, atomic writes
// and schema-versioned CSV tables.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace proctrace {

inline constexpr int kTableSchemaVersion = 1;

// Throws ConfigError when the file cannot be read.
std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`, so readers
// never observe a partial file. Creates missing parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// Shortest decimal text that reads back to the same double.
std::string format_number(double v);
std::string format_number(const std::optional<double>& v);  // empty when absent

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    // Throws ConfigError when the row width differs from the header.
    void add(std::vector<std::string> row);
};

// "# schema_version: 1", the header line, then one line per row. Cells
// holding commas, quotes or newlines are quoted.
std::string to_csv(const Table& t);

// Inverse of to_csv. Throws ParseError on a missing or unknown schema line
// or a ragged row.
Table parse_csv(std::string_view text);

}  // namespace proctrace

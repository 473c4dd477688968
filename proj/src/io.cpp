// SPDX-License-Identifier: Apache-2.0

#include "proctrace/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "proctrace/errors.hpp"

namespace proctrace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw ConfigError("cannot read " + path.string());
    return buf.str();
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw ConfigError("cannot write " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw ConfigError("cannot replace " + path.string() + ": " + ec.message());
    }
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (v == 0.0) return "0";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string format_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

void Table::add(std::vector<std::string> row) {
    if (row.size() != columns.size()) throw ConfigError("table row width does not match its header");
    rows.push_back(std::move(row));
}

namespace {

std::string quote_cell(const std::string& cell) {
    if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void append_line(std::string& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += quote_cell(cells[i]);
    }
    out += '\n';
}

// Splits one logical CSV record starting at `pos`; advances `pos` and `line`.
std::vector<std::string> read_record(std::string_view text, std::size_t& pos, std::size_t& line) {
    std::vector<std::string> cells(1);
    bool quoted = false;
    const std::size_t start_line = line;
    while (pos < text.size()) {
        const char c = text[pos++];
        if (quoted) {
            if (c == '"') {
                if (pos < text.size() && text[pos] == '"') {
                    cells.back() += '"';
                    ++pos;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                cells.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.emplace_back();
        } else if (c == '\n') {
            ++line;
            return cells;
        } else if (c != '\r') {
            cells.back() += c;
        }
    }
    if (quoted) throw ParseError(start_line, "unterminated quoted cell");
    return cells;
}

}  // namespace

std::string to_csv(const Table& t) {
    std::string out = "# schema_version: " + std::to_string(kTableSchemaVersion) + "\n";
    append_line(out, t.columns);
    for (const auto& row : t.rows) append_line(out, row);
    return out;
}

Table parse_csv(std::string_view text) {
    const std::string expected = "# schema_version: " + std::to_string(kTableSchemaVersion);
    const std::size_t eol = text.find('\n');
    if (text.substr(0, eol) != expected) throw ParseError(1, "expected '" + expected + "'");
    if (eol == std::string_view::npos) throw ParseError(1, "missing header row");
    std::size_t pos = eol + 1, line = 2;
    Table t;
    t.columns = read_record(text, pos, line);
    while (pos < text.size()) {
        const std::size_t at = line;
        auto row = read_record(text, pos, line);
        if (row.size() != t.columns.size()) throw ParseError(at, "row width does not match the header");
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace proctrace

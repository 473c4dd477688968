// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace proctrace {

// Line-oriented parse failure; `line` is 1-based.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& reason)
        : std::runtime_error("line " + std::to_string(line) + ": " + reason), line_(line), reason_(reason) {}
    std::size_t line() const { return line_; }
    const std::string& reason() const { return reason_; }

private:
    std::size_t line_;
    std::string reason_;
};

// Raw-log ingestion failure; `offset` is the byte offset of the offending record.
class IngestError : public std::runtime_error {
public:
    IngestError(std::size_t offset, const std::string& reason)
        : std::runtime_error("byte offset " + std::to_string(offset) + ": " + reason),
          offset_(offset),
          reason_(reason) {}
    std::size_t offset() const { return offset_; }
    const std::string& reason() const { return reason_; }

private:
    std::size_t offset_;
    std::string reason_;
};

// Invalid argument or configuration value.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace proctrace

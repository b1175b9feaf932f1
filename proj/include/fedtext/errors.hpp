// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fedtext {

/// Malformed input file. `line` is 1-based; 0 when not line-oriented.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string file, std::size_t line, const std::string& what)
        : std::runtime_error(file + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
          file_(std::move(file)),
          line_(line) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

/// Invalid configuration; `field` names the offending key path.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& what)
        : std::runtime_error(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

}  // namespace fedtext

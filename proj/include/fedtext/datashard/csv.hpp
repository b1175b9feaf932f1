// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace fedtext::datashard {

/// Streaming RFC 4180 reader: comma separated, double-quote escaping, quoted
/// fields may span lines, CRLF or LF record ends.
class CsvReader {
public:
    explicit CsvReader(std::istream& in) : in_(in) {}

    /// Next record, or nullopt at end of input. Throws std::runtime_error on an
    /// unterminated quote or stray characters after a closing quote.
    std::optional<std::vector<std::string>> next();

    /// 1-based line on which the most recently returned record started.
    std::size_t record_line() const { return record_line_; }

private:
    std::istream& in_;
    std::size_t line_ = 1;
    std::size_t record_line_ = 0;
};

/// Quotes the field if it contains a comma, quote, CR or LF.
std::string csv_escape(std::string_view field);

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace fedtext::datashard

// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtext/datashard/csv.hpp"

#include <stdexcept>

namespace fedtext::datashard {

std::optional<std::vector<std::string>> CsvReader::next() {
    int c = in_.get();
    if (c == std::char_traits<char>::eof()) return std::nullopt;
    record_line_ = line_;
    std::vector<std::string> fields;
    std::string field;
    enum class State { FieldStart, Unquoted, Quoted, QuoteInQuoted } state = State::FieldStart;
    for (;; c = in_.get()) {
        const bool eof = c == std::char_traits<char>::eof();
        const char ch = eof ? '\0' : static_cast<char>(c);
        switch (state) {
            case State::FieldStart:
            case State::Unquoted:
                if (eof || ch == '\n') {
                    if (!field.empty() && field.back() == '\r') field.pop_back();
                    fields.push_back(std::move(field));
                    if (!eof) ++line_;
                    return fields;
                }
                if (ch == ',') {
                    fields.push_back(std::move(field));
                    field.clear();
                    state = State::FieldStart;
                } else if (ch == '"' && state == State::FieldStart) {
                    state = State::Quoted;
                } else {
                    field += ch;
                    state = State::Unquoted;
                }
                break;
            case State::Quoted:
                if (eof)
                    throw std::runtime_error("unterminated quoted field starting on line " +
                                             std::to_string(record_line_));
                if (ch == '"') {
                    state = State::QuoteInQuoted;
                } else {
                    if (ch == '\n') ++line_;
                    field += ch;
                }
                break;
            case State::QuoteInQuoted:
                if (ch == '"') {
                    field += '"';
                    state = State::Quoted;
                } else if (ch == ',') {
                    fields.push_back(std::move(field));
                    field.clear();
                    state = State::FieldStart;
                } else if (eof || ch == '\n') {
                    fields.push_back(std::move(field));
                    if (!eof) ++line_;
                    return fields;
                } else if (ch == '\r') {
                    // tolerated before the newline
                } else {
                    throw std::runtime_error("unexpected character after closing quote on line " +
                                             std::to_string(line_));
                }
                break;
        }
    }
}

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << csv_escape(fields[i]);
    }
    out << '\n';
}

}  // namespace fedtext::datashard

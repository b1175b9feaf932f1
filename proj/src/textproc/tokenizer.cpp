// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtext/textproc/tokenizer.hpp"

#include <cstdint>

namespace fedtext::textproc {
namespace {

struct CodePoint {
    char32_t value;
    std::size_t length;  // bytes consumed
};

// Decodes one UTF-8 sequence at `pos`. Malformed input yields the raw byte as
// a one-byte code point so it survives tokenization untouched.
CodePoint decode(std::string_view s, std::size_t pos) {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    auto cont = [&](std::size_t k) -> int {
        if (pos + k >= s.size()) return -1;
        const auto b = static_cast<unsigned char>(s[pos + k]);
        return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
    };
    if (b0 < 0x80) return {b0, 1};
    if ((b0 & 0xE0) == 0xC0) {
        const int c1 = cont(1);
        if (c1 >= 0) return {static_cast<char32_t>(((b0 & 0x1F) << 6) | c1), 2};
    } else if ((b0 & 0xF0) == 0xE0) {
        const int c1 = cont(1), c2 = cont(2);
        if (c1 >= 0 && c2 >= 0) return {static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2), 3};
    } else if ((b0 & 0xF8) == 0xF0) {
        const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
        if (c1 >= 0 && c2 >= 0 && c3 >= 0)
            return {static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3), 4};
    }
    return {0xFFFFFFFFu, 1};
}

bool is_space(char32_t c) {
    switch (c) {
        case U' ': case U'\t': case U'\n': case U'\v': case U'\f': case U'\r':
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return c >= 0x2000 && c <= 0x200A;
    }
}

bool is_punct(char32_t c) {
    if (c < 0x80) {
        return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
               (c >= 0x7B && c <= 0x7E);
    }
    // Latin-1 punctuation, general punctuation block, CJK punctuation.
    switch (c) {
        case 0xA1: case 0xA7: case 0xAB: case 0xB6: case 0xB7: case 0xBB: case 0xBF:
            return true;
        default:
            return (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) ||
                   (c >= 0x3001 && c <= 0x3003) || (c >= 0x3008 && c <= 0x3011);
    }
}

void flush(std::string_view text, std::size_t begin, std::size_t end, std::vector<std::string>& out) {
    // strip leading punctuation
    while (begin < end) {
        const auto cp = decode(text, begin);
        if (!is_punct(cp.value)) break;
        begin += cp.length;
    }
    // strip trailing punctuation: walk forward remembering the end of the
    // last non-punctuation code point.
    std::size_t keep_end = begin;
    for (std::size_t pos = begin; pos < end;) {
        const auto cp = decode(text, pos);
        pos += cp.length;
        if (!is_punct(cp.value)) keep_end = pos;
    }
    if (keep_end == begin) return;
    std::string token(text.substr(begin, keep_end - begin));
    for (auto& ch : token)
        if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
    out.push_back(std::move(token));
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::size_t token_begin = 0;
    bool in_token = false;
    for (std::size_t pos = 0; pos < text.size();) {
        const auto cp = decode(text, pos);
        if (is_space(cp.value)) {
            if (in_token) flush(text, token_begin, pos, out);
            in_token = false;
        } else if (!in_token) {
            token_begin = pos;
            in_token = true;
        }
        pos += cp.length;
    }
    if (in_token) flush(text, token_begin, text.size(), out);
    return out;
}

}  // namespace fedtext::textproc

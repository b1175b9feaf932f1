// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtext/textproc/vocabulary.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "fedtext/errors.hpp"
#include "fedtext/textproc/tokenizer.hpp"

namespace fedtext::textproc {

Vocabulary::Vocabulary() {
    tokens_ = {std::string(kPadToken), std::string(kUnkToken)};
    ids_.emplace(tokens_[0], kPad);
    ids_.emplace(tokens_[1], kUnk);
}

Vocabulary Vocabulary::from_tokens(std::span<const std::string> tokens, std::size_t max_size) {
    if (max_size < 2) throw std::invalid_argument("vocabulary max_size must be at least 2");
    if (tokens.size() + 2 > max_size)
        throw std::invalid_argument("vocabulary of " + std::to_string(tokens.size() + 2) +
                                    " entries exceeds max_size " + std::to_string(max_size));
    Vocabulary v;
    v.max_size_ = max_size;
    for (const auto& t : tokens) {
        if (t.empty()) throw std::invalid_argument("vocabulary token is empty");
        const auto next = static_cast<std::int32_t>(v.tokens_.size());
        if (!v.ids_.emplace(t, next).second)
            throw std::invalid_argument("duplicate vocabulary token '" + t + "'");
        v.tokens_.push_back(t);
    }
    return v;
}

std::int32_t Vocabulary::id(std::string_view token) const {
    const auto it = ids_.find(std::string(token));
    return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return ids_.contains(std::string(token)); }

const std::string& Vocabulary::token(std::int32_t id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
        throw std::out_of_range("vocabulary id " + std::to_string(id) + " out of range");
    return tokens_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write vocabulary to " + path.string());
    for (std::size_t i = 2; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path, std::size_t max_size) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open vocabulary " + path.string());
    std::vector<std::string> tokens;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) throw ParseError(path.string(), lineno, "empty vocabulary entry");
        tokens.push_back(line);
    }
    try {
        return from_tokens(tokens, std::max(max_size, tokens.size() + 2));
    } catch (const std::invalid_argument& e) {
        throw ParseError(path.string(), 0, e.what());
    }
}

Vocabulary build_vocab(std::span<const std::string> corpus, std::size_t max_size) {
    if (max_size < 2) throw std::invalid_argument("vocabulary max_size must be at least 2");
    struct Stat {
        std::size_t count = 0;
        std::size_t first = 0;
    };
    std::unordered_map<std::string, Stat> stats;
    std::size_t position = 0;
    for (const auto& text : corpus) {
        for (auto& tok : tokenize(text)) {
            auto [it, inserted] = stats.try_emplace(std::move(tok));
            if (inserted) it->second.first = position;
            ++it->second.count;
            ++position;
        }
    }
    std::vector<std::pair<std::string, Stat>> ranked(stats.begin(), stats.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second.count != b.second.count) return a.second.count > b.second.count;
        return a.second.first < b.second.first;
    });
    const auto keep = std::min(ranked.size(), max_size - 2);
    std::vector<std::string> tokens;
    tokens.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) tokens.push_back(std::move(ranked[i].first));
    return Vocabulary::from_tokens(tokens, max_size);
}

std::vector<std::int32_t> encode_and_pad(std::string_view text, const Vocabulary& vocab, int max_seq_len) {
    if (max_seq_len <= 0) throw std::invalid_argument("max_seq_len must be positive");
    std::vector<std::int32_t> ids(static_cast<std::size_t>(max_seq_len), Vocabulary::kPad);
    const auto tokens = tokenize(text);
    const auto n = std::min(tokens.size(), ids.size());
    for (std::size_t i = 0; i < n; ++i) ids[i] = vocab.id(tokens[i]);
    return ids;
}

}  // namespace fedtext::textproc

// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fedtext::textproc {

/// Token <-> id map shared by every participant. Ids are contiguous from 0;
/// 0 is padding and 1 stands for any unknown token.
class Vocabulary {
public:
    static constexpr std::int32_t kPad = 0;
    static constexpr std::int32_t kUnk = 1;
    static constexpr std::size_t kDefaultMaxSize = 20000;
    static constexpr std::string_view kPadToken = "<pad>";
    static constexpr std::string_view kUnkToken = "<unk>";

    Vocabulary();

    /// Builds from regular tokens in id order (ids 2, 3, ...). Duplicates and
    /// the reserved spellings are rejected.
    static Vocabulary from_tokens(std::span<const std::string> tokens,
                                  std::size_t max_size = kDefaultMaxSize);

    std::int32_t id(std::string_view token) const;
    bool contains(std::string_view token) const;
    const std::string& token(std::int32_t id) const;
    std::size_t size() const { return tokens_.size(); }
    std::size_t max_size() const { return max_size_; }
    const std::vector<std::string>& tokens() const { return tokens_; }

    /// One regular token per line, in id order; reserved entries are implied.
    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path, std::size_t max_size = kDefaultMaxSize);

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::int32_t> ids_;
    std::size_t max_size_ = kDefaultMaxSize;
};

/// Frequency-ranked vocabulary (ties broken by first occurrence) keeping the
/// top max_size - 2 tokens after the reserved entries.
Vocabulary build_vocab(std::span<const std::string> corpus, std::size_t max_size = Vocabulary::kDefaultMaxSize);

/// Maps tokens through `vocab` (unknown -> 1), keeps the first `max_seq_len`
/// and right-pads with 0 to exactly `max_seq_len`.
std::vector<std::int32_t> encode_and_pad(std::string_view text, const Vocabulary& vocab, int max_seq_len = 100);

}  // namespace fedtext::textproc

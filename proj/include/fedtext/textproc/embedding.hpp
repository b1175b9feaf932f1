// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fedtext/textproc/vocabulary.hpp"

namespace fedtext::textproc {

/// Frozen id -> vector table aligned with one Vocabulary. Row 0 (padding) is zero.
struct EmbeddingMatrix {
    Eigen::MatrixXd vectors;
    /// Fraction of regular vocabulary words found in the source file.
    double coverage = 0.0;

    int embed_dim() const { return static_cast<int>(vectors.cols()); }
    std::size_t rows() const { return static_cast<std::size_t>(vectors.rows()); }
};

/// Word vectors parsed from a text file, restricted to the words a caller asked for.
using EmbeddingTable = std::unordered_map<std::string, Eigen::RowVectorXd>;

/// Parses the whitespace-separated "word v1 ... vD" format. Every line is
/// validated even when its word is not kept. A wrong value count is a
/// ParseError naming the line (reported as a dimension mismatch when the first
/// line disagrees with `embed_dim`).
EmbeddingTable read_embedding_table(const std::filesystem::path& path, int embed_dim,
                                    const std::function<bool(std::string_view)>& keep);

inline constexpr std::uint64_t kFallbackEmbeddingSeed = 0x5EEDF00Dull;

/// Rows for vocabulary words come from `table`; absent words get uniform
/// [-0.05, 0.05] vectors drawn in id order from a fixed seed.
EmbeddingMatrix build_embedding_matrix(const EmbeddingTable& table, const Vocabulary& vocab, int embed_dim);

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, int embed_dim = 100);

/// Top-k vocabulary words by cosine similarity to `word`, excluding the word
/// itself and the reserved entries; equal similarities are ordered by id.
std::vector<std::pair<std::string, double>> nearest_neighbor(std::string_view word, const EmbeddingMatrix& embedding,
                                                             const Vocabulary& vocab, std::size_t k);

}  // namespace fedtext::textproc

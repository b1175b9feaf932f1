// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedtext/textproc/embedding.hpp"
#include "fedtext/textproc/vocabulary.hpp"

namespace fedtext::textproc {

inline constexpr int kNumClasses = 3;
using ClassCounts = std::array<std::size_t, kNumClasses>;

/// 0: not depressed, 1: moderately depressed, 2: severely depressed.
std::string_view label_name(int label);

/// Accepts "0".."2" or a class name (case-insensitive, surrounding spaces ignored).
std::optional<int> parse_label(std::string_view text);

struct Sample {
    std::string text;
    int label = 0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct LabeledDataset {
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
    ClassCounts class_counts() const;
    std::vector<std::string> texts() const;
};

struct AugmentOptions {
    double sub_prob = 0.15;
    double min_similarity = 0.6;
    std::uint64_t seed = 0;
};

/// Tops every minority class up to the majority count with copies of random
/// same-class samples whose tokens are each replaced, with probability
/// `sub_prob`, by their nearest embedding neighbour when that neighbour's
/// cosine similarity is at least `min_similarity`. Copies with no substitution
/// keep the original text verbatim. Original samples come first.
LabeledDataset augment_balance(const LabeledDataset& dataset, const EmbeddingMatrix& embedding,
                               const Vocabulary& vocab, const AugmentOptions& options);

}  // namespace fedtext::textproc

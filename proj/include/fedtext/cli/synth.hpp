// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fedtext/textproc/dataset.hpp"

namespace fedtext::cli {

struct SynthOptions {
    int n_per_class = 200;
    int test_per_class = 0;  // 0: half of n_per_class, at least 1
    int vocab_size = 300;    // marker words plus filler words
    int markers_per_class = 20;
    int min_tokens = 24;
    int max_tokens = 32;
    double marker_rate = 0.25;
    int embed_dim = 100;
    std::uint64_t seed = 0;
};

struct SynthCorpus {
    textproc::LabeledDataset train;
    textproc::LabeledDataset test;
    std::array<std::vector<std::string>, textproc::kNumClasses> markers;
    std::vector<std::string> fillers;
    /// Word vectors in file order: markers by class, then fillers.
    std::vector<std::pair<std::string, Eigen::RowVectorXd>> embeddings;
};

/// Every text holds at least one marker of its own class and none of the
/// others; marker vectors of a class lie near a shared class centre.
SynthCorpus generate_synthetic_corpus(const SynthOptions& options);
SynthCorpus generate_synthetic_corpus(int n_per_class, int vocab_size, std::uint64_t seed);

inline constexpr std::string_view kSynthTrainFile = "train.csv";
inline constexpr std::string_view kSynthTestFile = "test.csv";
inline constexpr std::string_view kSynthEmbeddingFile = "embeddings.txt";
inline constexpr std::string_view kSynthConfigFile = "config.json";

/// Writes train.csv, test.csv, embeddings.txt and a runnable config.json into `dir`.
void write_synthetic_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir,
                            const SynthOptions& options = {});

}  // namespace fedtext::cli

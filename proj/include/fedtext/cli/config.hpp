// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include "fedtext/flcore/federation.hpp"

namespace fedtext::cli {

enum class RunMode { Centralized, Federated };
enum class TokenizerMode { Common, PerClient };
enum class Backend { InMemory, Filesystem, Socket };

std::string_view to_string(RunMode m);
std::string_view to_string(TokenizerMode m);
std::string_view to_string(Backend b);

struct AugmentationConfig {
    bool enabled = false;
    double sub_prob = 0.15;
    double min_similarity = 0.6;
};

struct TransportConfig {
    Backend backend = Backend::InMemory;
    std::filesystem::path root;  // Filesystem
    std::string address;         // Socket, HOST:PORT
};

/// Client-private noise words inserted into every training text of a client.
struct NoiseConfig {
    int client_noise_tokens = 0;     // inserted per text
    int noise_vocab_per_client = 0;  // distinct noise words of each client
    bool enabled() const { return client_noise_tokens > 0 && noise_vocab_per_client > 0; }
};

struct ExperimentConfig {
    RunMode mode = RunMode::Federated;
    std::filesystem::path train_csv;
    std::filesystem::path test_csv;
    std::filesystem::path embedding_path;
    /// Exactly one of these is set after parsing; the corpus defaults to train_csv.
    std::filesystem::path tokenizer_corpus;
    std::filesystem::path vocab_path;
    std::size_t vocab_max_size = 20000;
    TokenizerMode tokenizer_mode = TokenizerMode::Common;
    flcore::FederationConfig federation;
    std::string shard_plan_name = "iid";  // "iid", "table1" or "matrix"
    AugmentationConfig augmentation;
    TransportConfig transport;
    NoiseConfig noise;
    std::filesystem::path output_dir = "fedtext-out";

    std::uint64_t seed() const { return federation.seed; }

    /// Throws ConfigError naming the offending field. Checks that input files exist.
    void validate() const;
};

/// Parses a JSON config document. Relative paths resolve against `base_dir`.
/// Unknown keys and type mismatches throw ConfigError; the result is validated.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& file);

/// Canonical JSON of a config with absolute paths (parse_config accepts it back).
std::string dump_config(const ExperimentConfig& config);

}  // namespace fedtext::cli

// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fedtext/cli/config.hpp"
#include "fedtext/datashard/shard.hpp"
#include "fedtext/flcore/federation.hpp"
#include "fedtext/textproc/vocabulary.hpp"

namespace fedtext::cli {

struct ClientData {
    int client_id = 0;
    textproc::Vocabulary vocab;  // the client's own vocabulary in per-client mode
    Eigen::MatrixXd embedding;   // empty: use the shared one
    datashard::EncodedDataset data;
    double preparation_ms = 0.0;
};

struct PreparedExperiment {
    textproc::Vocabulary vocab;
    Eigen::MatrixXd embedding;
    datashard::EncodedDataset train;  // after augmentation
    datashard::EncodedDataset test;
    std::vector<std::vector<std::size_t>> assignment;  // federated only
    std::vector<ClientData> clients;                    // indexed by id; unprepared clients are empty
    double shared_preparation_ms = 0.0;

    const Eigen::MatrixXd& embedding_of(int client) const;
};

/// Loads data, builds vocabularies and embeddings, augments, partitions and
/// encodes. With `only_client`, per-client work is done for that client alone.
PreparedExperiment prepare_experiment(const ExperimentConfig& config, std::optional<int> only_client = {});

/// Client `client`'s private noise words, inserted `client_noise_tokens` times
/// into each text at seeded positions.
textproc::LabeledDataset inject_client_noise(const textproc::LabeledDataset& data, int client, const NoiseConfig& noise,
                                             std::uint64_t seed);
std::string noise_word(int client, int index);

struct RunOptions {
    bool write_outputs = true;
    std::ostream* summary = nullptr;  // per-round lines; nullptr is silent
};

/// Files written to the output directory.
inline constexpr std::string_view kRoundsFile = "rounds.jsonl";
inline constexpr std::string_view kMetricsFile = "metrics.csv";
inline constexpr std::string_view kLedgerFile = "ledger.csv";
inline constexpr std::string_view kProfileFile = "profile.csv";
inline constexpr std::string_view kModelFile = "final_model.bin";
inline constexpr std::string_view kModelInfoFile = "final_model.json";
inline constexpr std::string_view kVocabFile = "vocab.txt";
inline constexpr std::string_view kResolvedConfigFile = "config.resolved.json";
inline constexpr std::string_view kAblationFile = "ablation.csv";

/// Prepare failures come out as std::runtime_error tagged "[prepare]"; round
/// failures as flcore::RoundError.
flcore::FederationResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

struct AblationResult {
    std::vector<double> common_accuracy;      // one entry per round
    std::vector<double> per_client_accuracy;  // aligned with common_accuracy
};

/// The same federation with a common and with per-client vocabularies.
/// Outputs go to <output_dir>/common, <output_dir>/per_client and ablation.csv.
AblationResult run_tokenizer_ablation(const ExperimentConfig& config, const RunOptions& options = {});

/// Runs client `client_id` against a networked store at `address`.
void run_remote_client(const ExperimentConfig& config, int client_id, const std::string& address);

struct Prediction {
    int label = 0;
    std::array<double, textproc::kNumClasses> scores{};
};

/// Classifies `text` with a model written by run_experiment.
Prediction predict_text(const std::filesystem::path& model_blob, std::string_view text);

}  // namespace fedtext::cli

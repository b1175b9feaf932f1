// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedtext/seqnet/model.hpp"
#include "fedtext/seqnet/training.hpp"
#include "fedtext/textproc/dataset.hpp"
#include "fedtext/textproc/vocabulary.hpp"

namespace fedtext::datashard {

using textproc::ClassCounts;
using textproc::kNumClasses;

/// Reads a `text,label` CSV. Errors (ParseError) name the offending row's line.
textproc::LabeledDataset read_labeled_csv(const std::filesystem::path& path);

void write_labeled_csv(const std::filesystem::path& path, const textproc::LabeledDataset& dataset);

/// Every sample tokenized and padded through one vocabulary.
struct EncodedDataset {
    seqnet::EncodedBatch samples;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    ClassCounts class_counts() const;
};

EncodedDataset encode_dataset(const textproc::LabeledDataset& dataset, const textproc::Vocabulary& vocab,
                              int max_seq_len);

/// read_labeled_csv followed by encode_dataset.
EncodedDataset load_dataset(const std::filesystem::path& path, const textproc::Vocabulary& vocab,
                            int max_seq_len = 100);

/// One client's data. `sample_ids` index the source dataset, ascending.
struct ClientShard {
    int client_id = 0;
    seqnet::EncodedBatch samples;
    std::vector<std::size_t> sample_ids;
    ClassCounts class_counts{};

    std::size_t size() const { return sample_ids.size(); }
};

/// Either IID, or a clients x classes proportion matrix whose columns each sum to 1.
struct ShardPlan {
    enum class Mode { IID, NonIID };
    Mode mode = Mode::IID;
    int clients = 0;
    Eigen::MatrixXd proportions;  // NonIID only: clients x kNumClasses, column order = label id

    static ShardPlan iid(int clients);
    /// `percent` rows are clients, columns follow label ids (not, moderate, severe).
    static ShardPlan non_iid_percent(const std::vector<std::vector<double>>& percent);
    /// Built-in five-client class-imbalanced plan ("table1").
    static ShardPlan table1();

    int client_count() const { return clients; }
    void validate() const;
};

/// Sample indices per client. Within each class the indices are shuffled with
/// a class-specific stream and dealt round-robin from client 0.
std::vector<std::vector<std::size_t>> partition_iid(const std::vector<int>& labels, int n_clients,
                                                    std::uint64_t seed);

/// Within each class the shuffled indices are cut into contiguous runs whose
/// lengths are the largest-remainder rounding of proportion x class count.
std::vector<std::vector<std::size_t>> partition_noniid(const std::vector<int>& labels, const ShardPlan& plan,
                                                       std::uint64_t seed);

std::vector<std::vector<std::size_t>> partition(const std::vector<int>& labels, const ShardPlan& plan,
                                                std::uint64_t seed);

/// Hamilton apportionment of `total` by `weights` (non-negative, summing to 1).
/// Remainder ties go to the lower index.
std::vector<std::size_t> largest_remainder(std::size_t total, const std::vector<double>& weights);

std::vector<ClientShard> make_shards(const EncodedDataset& dataset,
                                     const std::vector<std::vector<std::size_t>>& assignment);

std::vector<ClientShard> split_iid(const EncodedDataset& dataset, int n_clients, std::uint64_t seed);
std::vector<ClientShard> split_noniid(const EncodedDataset& dataset, const ShardPlan& plan, std::uint64_t seed);

struct ImbalanceReport {
    bool data_imbalanced = false;
    bool class_imbalanced = false;
    /// shards x classes; entry (i, q) is the share of shard i's samples in class q.
    Eigen::MatrixXd proportions;
};

inline constexpr double kProportionTolerance = 1e-9;

ImbalanceReport imbalance_report(const std::vector<ClientShard>& shards);

}  // namespace fedtext::datashard

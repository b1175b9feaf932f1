// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtext/datashard/shard.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "fedtext/datashard/csv.hpp"
#include "fedtext/errors.hpp"
#include "fedtext/rng.hpp"
#include "fedtext/textproc/tokenizer.hpp"

namespace fedtext::datashard {

textproc::LabeledDataset read_labeled_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset " + path.string());
    const auto file = path.string();
    CsvReader reader(in);
    textproc::LabeledDataset out;
    try {
        auto header = reader.next();
        if (!header) throw ParseError(file, 0, "empty file");
        if (!header->empty() && header->front().starts_with("\xEF\xBB\xBF")) header->front().erase(0, 3);
        if (header->size() != 2 || (*header)[0] != "text" || (*header)[1] != "label")
            throw ParseError(file, reader.record_line(), "expected header 'text,label'");
        while (auto row = reader.next()) {
            const auto line = reader.record_line();
            if (row->size() == 1 && row->front().empty()) continue;  // blank line
            if (row->size() != 2)
                throw ParseError(file, line, "expected 2 fields, found " + std::to_string(row->size()));
            const auto label = textproc::parse_label((*row)[1]);
            if (!label) throw ParseError(file, line, "unrecognized label '" + (*row)[1] + "'");
            if (textproc::tokenize((*row)[0]).empty())
                throw ParseError(file, line, "text is empty after normalization");
            out.samples.push_back({std::move((*row)[0]), *label});
        }
    } catch (const std::runtime_error& e) {
        if (dynamic_cast<const ParseError*>(&e)) throw;
        throw ParseError(file, reader.record_line(), e.what());
    }
    if (out.samples.empty()) throw ParseError(file, 0, "no data rows");
    return out;
}

void write_labeled_csv(const std::filesystem::path& path, const textproc::LabeledDataset& dataset) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_csv_row(out, {"text", "label"});
    for (const auto& s : dataset.samples) write_csv_row(out, {s.text, std::to_string(s.label)});
}

ClassCounts EncodedDataset::class_counts() const {
    ClassCounts c{};
    for (int l : labels) ++c.at(static_cast<std::size_t>(l));
    return c;
}

EncodedDataset encode_dataset(const textproc::LabeledDataset& dataset, const textproc::Vocabulary& vocab,
                              int max_seq_len) {
    EncodedDataset out;
    const auto n = static_cast<Eigen::Index>(dataset.size());
    out.samples.token_ids.resize(n, max_seq_len);
    out.samples.labels = Eigen::MatrixXd::Zero(n, kNumClasses);
    out.labels.reserve(dataset.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = dataset.samples[static_cast<std::size_t>(i)];
        if (s.label < 0 || s.label >= kNumClasses) throw std::invalid_argument("label out of range");
        const auto ids = textproc::encode_and_pad(s.text, vocab, max_seq_len);
        for (int t = 0; t < max_seq_len; ++t) out.samples.token_ids(i, t) = ids[static_cast<std::size_t>(t)];
        out.samples.labels(i, s.label) = 1.0;
        out.labels.push_back(s.label);
    }
    return out;
}

EncodedDataset load_dataset(const std::filesystem::path& path, const textproc::Vocabulary& vocab, int max_seq_len) {
    return encode_dataset(read_labeled_csv(path), vocab, max_seq_len);
}

ShardPlan ShardPlan::iid(int clients) {
    ShardPlan p;
    p.mode = Mode::IID;
    p.clients = clients;
    return p;
}

ShardPlan ShardPlan::non_iid_percent(const std::vector<std::vector<double>>& percent) {
    ShardPlan p;
    p.mode = Mode::NonIID;
    p.clients = static_cast<int>(percent.size());
    p.proportions.resize(p.clients, kNumClasses);
    for (int i = 0; i < p.clients; ++i) {
        const auto& row = percent[static_cast<std::size_t>(i)];
        if (row.size() != kNumClasses)
            throw std::invalid_argument("shard plan row " + std::to_string(i) + " must have " +
                                        std::to_string(kNumClasses) + " entries");
        for (int q = 0; q < kNumClasses; ++q) p.proportions(i, q) = row[static_cast<std::size_t>(q)] / 100.0;
    }
    p.validate();
    return p;
}

ShardPlan ShardPlan::table1() {
    // Columns: not, moderately, severely depressed.
    return non_iid_percent({{10, 10, 40}, {40, 10, 10}, {10, 40, 10}, {20, 30, 10}, {20, 10, 30}});
}

void ShardPlan::validate() const {
    if (clients < 1) throw std::invalid_argument("shard plan needs at least one client");
    if (mode == Mode::IID) return;
    if (proportions.rows() != clients || proportions.cols() != kNumClasses)
        throw std::invalid_argument("shard plan matrix must be clients x 3");
    if (!proportions.allFinite() || proportions.minCoeff() < -kProportionTolerance ||
        proportions.maxCoeff() > 1.0 + kProportionTolerance)
        throw std::invalid_argument("shard plan entries must lie in [0, 1]");
    for (int q = 0; q < kNumClasses; ++q) {
        const double s = proportions.col(q).sum();
        if (std::abs(s - 1.0) > kProportionTolerance)
            throw std::invalid_argument("shard plan column " + std::to_string(q) + " sums to " + std::to_string(s) +
                                        ", expected 1");
    }
}

namespace {

std::array<std::vector<std::size_t>, kNumClasses> shuffled_by_class(const std::vector<int>& labels,
                                                                    std::uint64_t seed) {
    std::array<std::vector<std::size_t>, kNumClasses> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= kNumClasses) throw std::invalid_argument("label out of range");
        by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    }
    for (int q = 0; q < kNumClasses; ++q) {
        Rng rng(derive_seed(seed, {0x5A, q}));
        fedtext::shuffle(by_class[static_cast<std::size_t>(q)], rng);
    }
    return by_class;
}

void sort_all(std::vector<std::vector<std::size_t>>& parts) {
    for (auto& p : parts) std::sort(p.begin(), p.end());
}

}  // namespace

std::vector<std::vector<std::size_t>> partition_iid(const std::vector<int>& labels, int n_clients,
                                                    std::uint64_t seed) {
    if (n_clients < 1) throw std::invalid_argument("split_iid: n_clients must be at least 1");
    std::vector<std::vector<std::size_t>> parts(static_cast<std::size_t>(n_clients));
    for (const auto& idx : shuffled_by_class(labels, seed))
        for (std::size_t k = 0; k < idx.size(); ++k) parts[k % parts.size()].push_back(idx[k]);
    sort_all(parts);
    return parts;
}

std::vector<std::size_t> largest_remainder(std::size_t total, const std::vector<double>& weights) {
    std::vector<std::size_t> out(weights.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = weights[i] * static_cast<double>(total);
        // guard against 0.1 * 1000 = 99.999999...
        const double snapped = std::abs(exact - std::round(exact)) < 1e-9 ? std::round(exact) : exact;
        out[i] = static_cast<std::size_t>(std::floor(snapped));
        assigned += out[i];
        remainders.emplace_back(snapped - std::floor(snapped), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < total && k < remainders.size(); ++k, ++assigned)
        ++out[remainders[k].second];
    if (assigned != total) throw std::invalid_argument("largest_remainder: weights do not sum to 1");
    return out;
}

std::vector<std::vector<std::size_t>> partition_noniid(const std::vector<int>& labels, const ShardPlan& plan,
                                                       std::uint64_t seed) {
    if (plan.mode != ShardPlan::Mode::NonIID) throw std::invalid_argument("split_noniid: plan is not non-IID");
    plan.validate();
    std::vector<std::vector<std::size_t>> parts(static_cast<std::size_t>(plan.clients));
    const auto by_class = shuffled_by_class(labels, seed);
    for (int q = 0; q < kNumClasses; ++q) {
        const auto& idx = by_class[static_cast<std::size_t>(q)];
        std::vector<double> w(static_cast<std::size_t>(plan.clients));
        for (int i = 0; i < plan.clients; ++i) w[static_cast<std::size_t>(i)] = plan.proportions(i, q);
        const auto counts = largest_remainder(idx.size(), w);
        std::size_t offset = 0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            parts[i].insert(parts[i].end(), idx.begin() + static_cast<std::ptrdiff_t>(offset),
                            idx.begin() + static_cast<std::ptrdiff_t>(offset + counts[i]));
            offset += counts[i];
        }
    }
    sort_all(parts);
    return parts;
}

std::vector<std::vector<std::size_t>> partition(const std::vector<int>& labels, const ShardPlan& plan,
                                                std::uint64_t seed) {
    return plan.mode == ShardPlan::Mode::IID ? partition_iid(labels, plan.clients, seed)
                                             : partition_noniid(labels, plan, seed);
}

std::vector<ClientShard> make_shards(const EncodedDataset& dataset,
                                     const std::vector<std::vector<std::size_t>>& assignment) {
    std::vector<ClientShard> shards;
    shards.reserve(assignment.size());
    for (std::size_t k = 0; k < assignment.size(); ++k) {
        ClientShard s;
        s.client_id = static_cast<int>(k);
        s.sample_ids = assignment[k];
        std::vector<Eigen::Index> rows(s.sample_ids.begin(), s.sample_ids.end());
        s.samples = seqnet::gather_batch(dataset.samples, rows, 0, rows.size());
        for (auto id : s.sample_ids) ++s.class_counts.at(static_cast<std::size_t>(dataset.labels.at(id)));
        shards.push_back(std::move(s));
    }
    return shards;
}

std::vector<ClientShard> split_iid(const EncodedDataset& dataset, int n_clients, std::uint64_t seed) {
    return make_shards(dataset, partition_iid(dataset.labels, n_clients, seed));
}

std::vector<ClientShard> split_noniid(const EncodedDataset& dataset, const ShardPlan& plan, std::uint64_t seed) {
    return make_shards(dataset, partition_noniid(dataset.labels, plan, seed));
}

ImbalanceReport imbalance_report(const std::vector<ClientShard>& shards) {
    ImbalanceReport r;
    const auto n = static_cast<Eigen::Index>(shards.size());
    r.proportions = Eigen::MatrixXd::Zero(n, kNumClasses);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = shards[static_cast<std::size_t>(i)];
        const auto total = static_cast<double>(s.size());
        if (total > 0)
            for (int q = 0; q < kNumClasses; ++q)
                r.proportions(i, q) = static_cast<double>(s.class_counts[static_cast<std::size_t>(q)]) / total;
    }
    for (std::size_t i = 0; i < shards.size(); ++i)
        for (std::size_t j = i + 1; j < shards.size(); ++j) {
            if (shards[i].size() != shards[j].size()) r.data_imbalanced = true;
            for (int q = 0; q < kNumClasses; ++q)
                if (std::abs(r.proportions(static_cast<Eigen::Index>(i), q) -
                             r.proportions(static_cast<Eigen::Index>(j), q)) > kProportionTolerance)
                    r.class_imbalanced = true;
        }
    return r;
}

}  // namespace fedtext::datashard

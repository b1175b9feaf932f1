// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtext/textproc/dataset.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

#include "fedtext/rng.hpp"
#include "fedtext/textproc/tokenizer.hpp"

namespace fedtext::textproc {
namespace {

constexpr std::array<std::string_view, kNumClasses> kLabelNames = {"not depressed", "moderately depressed",
                                                                   "severely depressed"};

std::string lower_trimmed(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    std::string out(s);
    for (auto& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

}  // namespace

std::string_view label_name(int label) {
    if (label < 0 || label >= kNumClasses) throw std::out_of_range("label out of range");
    return kLabelNames[static_cast<std::size_t>(label)];
}

std::optional<int> parse_label(std::string_view text) {
    const auto s = lower_trimmed(text);
    if (s.size() == 1 && s[0] >= '0' && s[0] < '0' + kNumClasses) return s[0] - '0';
    for (int q = 0; q < kNumClasses; ++q)
        if (s == kLabelNames[static_cast<std::size_t>(q)]) return q;
    return std::nullopt;
}

ClassCounts LabeledDataset::class_counts() const {
    ClassCounts counts{};
    for (const auto& s : samples) ++counts.at(static_cast<std::size_t>(s.label));
    return counts;
}

std::vector<std::string> LabeledDataset::texts() const {
    std::vector<std::string> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.text);
    return out;
}

LabeledDataset augment_balance(const LabeledDataset& dataset, const EmbeddingMatrix& embedding,
                               const Vocabulary& vocab, const AugmentOptions& options) {
    std::array<std::vector<std::size_t>, kNumClasses> by_class;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const int label = dataset.samples[i].label;
        if (label < 0 || label >= kNumClasses) throw std::invalid_argument("augment_balance: label out of range");
        by_class[static_cast<std::size_t>(label)].push_back(i);
    }
    std::size_t majority = 0;
    for (int q = 0; q < kNumClasses; ++q) {
        if (by_class[static_cast<std::size_t>(q)].empty())
            throw std::invalid_argument("augment_balance: class '" + std::string(label_name(q)) + "' has no samples");
        majority = std::max(majority, by_class[static_cast<std::size_t>(q)].size());
    }

    LabeledDataset out = dataset;
    Rng rng(derive_seed(options.seed, {0xA0}));
    std::unordered_map<std::string, std::optional<std::string>> neighbour_cache;
    auto substitute = [&](const std::string& token) -> std::optional<std::string> {
        auto it = neighbour_cache.find(token);
        if (it != neighbour_cache.end()) return it->second;
        std::optional<std::string> result;
        if (vocab.contains(token) && vocab.id(token) >= 2) {
            const auto nn = nearest_neighbor(token, embedding, vocab, 1);
            if (!nn.empty() && nn.front().second >= options.min_similarity) result = nn.front().first;
        }
        neighbour_cache.emplace(token, result);
        return result;
    };

    for (int q = 0; q < kNumClasses; ++q) {
        const auto& pool = by_class[static_cast<std::size_t>(q)];
        for (std::size_t n = pool.size(); n < majority; ++n) {
            const auto& source = dataset.samples[pool[uniform_index(rng, pool.size())]];
            auto tokens = tokenize(source.text);
            bool changed = false;
            for (auto& tok : tokens) {
                if (uniform01(rng) >= options.sub_prob) continue;
                if (auto repl = substitute(tok)) {
                    tok = *repl;
                    changed = true;
                }
            }
            Sample synthetic{source.text, q};
            if (changed) {
                synthetic.text.clear();
                for (std::size_t i = 0; i < tokens.size(); ++i) {
                    if (i) synthetic.text += ' ';
                    synthetic.text += tokens[i];
                }
            }
            out.samples.push_back(std::move(synthetic));
        }
    }
    return out;
}

}  // namespace fedtext::textproc

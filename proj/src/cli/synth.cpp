// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtext/cli/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "fedtext/datashard/shard.hpp"
#include "fedtext/rng.hpp"

namespace fedtext::cli {
namespace {

constexpr std::array<std::string_view, textproc::kNumClasses> kMarkerStems = {"calm", "tired", "hopeless"};
constexpr double kCentreScale = 0.1;
constexpr double kMarkerSpread = 0.03;
constexpr double kFillerScale = 0.05;

/// Box-Muller on the portable uniform source, so files match across standard libraries.
double gaussian(Rng& rng) {
    double u = uniform01(rng);
    while (u <= 0.0) u = uniform01(rng);
    const double v = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
}

textproc::LabeledDataset make_split(const SynthCorpus& c, const SynthOptions& o, int per_class, Rng& rng) {
    textproc::LabeledDataset d;
    for (int q = 0; q < textproc::kNumClasses; ++q) {
        const auto& family = c.markers[static_cast<std::size_t>(q)];
        for (int i = 0; i < per_class; ++i) {
            const auto span = static_cast<std::uint64_t>(o.max_tokens - o.min_tokens + 1);
            const auto len = static_cast<std::size_t>(o.min_tokens) + uniform_index(rng, span);
            std::vector<std::string_view> words(len);
            bool has_marker = false;
            for (auto& w : words) {
                if (uniform01(rng) < o.marker_rate) {
                    w = family[uniform_index(rng, family.size())];
                    has_marker = true;
                } else {
                    w = c.fillers[uniform_index(rng, c.fillers.size())];
                }
            }
            if (!has_marker) words[uniform_index(rng, len)] = family[uniform_index(rng, family.size())];
            d.samples.push_back({fmt::format("{}", fmt::join(words, " ")), q});
        }
    }
    shuffle(d.samples, rng);
    return d;
}

}  // namespace

SynthCorpus generate_synthetic_corpus(const SynthOptions& o) {
    if (o.n_per_class < 1) throw std::invalid_argument("n_per_class must be >= 1");
    if (o.vocab_size < 4) throw std::invalid_argument("vocab_size must be >= 4");
    if (o.min_tokens < 1 || o.max_tokens < o.min_tokens) throw std::invalid_argument("bad text length range");
    if (o.embed_dim < 1) throw std::invalid_argument("embed_dim must be >= 1");

    const int m = std::clamp(o.markers_per_class, 1, std::max(1, o.vocab_size / 6));
    const int n_fillers = o.vocab_size - textproc::kNumClasses * m;

    SynthCorpus c;
    Rng emb_rng(derive_seed(o.seed, {3}));
    for (int q = 0; q < textproc::kNumClasses; ++q) {
        Eigen::RowVectorXd centre(o.embed_dim);
        for (int j = 0; j < o.embed_dim; ++j) centre[j] = kCentreScale * gaussian(emb_rng);
        for (int i = 0; i < m; ++i) {
            auto word = fmt::format("{}{}", kMarkerStems[static_cast<std::size_t>(q)], i);
            Eigen::RowVectorXd v = centre;
            for (int j = 0; j < o.embed_dim; ++j) v[j] += kMarkerSpread * gaussian(emb_rng);
            c.markers[static_cast<std::size_t>(q)].push_back(word);
            c.embeddings.emplace_back(std::move(word), std::move(v));
        }
    }
    for (int i = 0; i < n_fillers; ++i) {
        auto word = fmt::format("word{}", i);
        Eigen::RowVectorXd v(o.embed_dim);
        for (int j = 0; j < o.embed_dim; ++j) v[j] = kFillerScale * gaussian(emb_rng);
        c.fillers.push_back(word);
        c.embeddings.emplace_back(std::move(word), std::move(v));
    }

    Rng train_rng(derive_seed(o.seed, {1}));
    Rng test_rng(derive_seed(o.seed, {2}));
    const int test_per_class = o.test_per_class > 0 ? o.test_per_class : std::max(1, o.n_per_class / 2);
    c.train = make_split(c, o, o.n_per_class, train_rng);
    c.test = make_split(c, o, test_per_class, test_rng);
    return c;
}

SynthCorpus generate_synthetic_corpus(int n_per_class, int vocab_size, std::uint64_t seed) {
    SynthOptions o;
    o.n_per_class = n_per_class;
    o.vocab_size = vocab_size;
    o.seed = seed;
    return generate_synthetic_corpus(o);
}

void write_synthetic_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir, const SynthOptions& o) {
    std::filesystem::create_directories(dir);
    datashard::write_labeled_csv(dir / kSynthTrainFile, corpus.train);
    datashard::write_labeled_csv(dir / kSynthTestFile, corpus.test);

    std::ofstream emb(dir / kSynthEmbeddingFile, std::ios::binary);
    if (!emb) throw std::runtime_error("cannot write " + (dir / kSynthEmbeddingFile).string());
    std::string line;
    for (const auto& [word, v] : corpus.embeddings) {
        line = word;
        for (Eigen::Index j = 0; j < v.size(); ++j) fmt::format_to(std::back_inserter(line), " {:.6f}", v[j]);
        line += '\n';
        emb << line;
    }

    std::ofstream cfg(dir / kSynthConfigFile, std::ios::binary);
    if (!cfg) throw std::runtime_error("cannot write " + (dir / kSynthConfigFile).string());
    cfg << fmt::format(R"({{
  "mode": "federated",
  "train_csv": "{}",
  "test_csv": "{}",
  "embedding_path": "{}",
  "vocab_max_size": 20000,
  "federation": {{
    "rounds": 10,
    "clients": 5,
    "learning_rate": 0.005,
    "batch_size": 16,
    "local_epochs": 1
  }},
  "model": {{
    "cell": "gru",
    "embed_dim": {},
    "recurrent_units": 32,
    "dense_units": 32,
    "dropout_rate": 0.25,
    "max_seq_len": {}
  }},
  "shard_plan": "iid",
  "output_dir": "run",
  "seed": {}
}}
)",
                       kSynthTrainFile, kSynthTestFile, kSynthEmbeddingFile, o.embed_dim, o.max_tokens, o.seed);
}

}  // namespace fedtext::cli

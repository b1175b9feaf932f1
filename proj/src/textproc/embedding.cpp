// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtext/textproc/embedding.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <stdexcept>

#include "fedtext/errors.hpp"
#include "fedtext/rng.hpp"

namespace fedtext::textproc {
namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (pos < line.size()) {
        while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
        const auto start = pos;
        while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t') ++pos;
        if (pos > start) fields.push_back(line.substr(start, pos - start));
    }
    return fields;
}

}  // namespace

EmbeddingTable read_embedding_table(const std::filesystem::path& path, int embed_dim,
                                    const std::function<bool(std::string_view)>& keep) {
    if (embed_dim <= 0) throw std::invalid_argument("embed_dim must be positive");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open embedding file " + path.string());
    EmbeddingTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto fields = split_fields(line);
        if (fields.empty()) continue;
        const auto values = fields.size() - 1;
        if (values != static_cast<std::size_t>(embed_dim)) {
            if (lineno == 1)
                throw ParseError(path.string(), lineno,
                                 "dimension mismatch: file has " + std::to_string(values) +
                                     " values per word, expected " + std::to_string(embed_dim));
            throw ParseError(path.string(), lineno,
                             "expected a word and " + std::to_string(embed_dim) + " values, found " +
                                 std::to_string(fields.size()) + " fields");
        }
        if (!keep(fields[0])) continue;
        Eigen::RowVectorXd v(embed_dim);
        for (int i = 0; i < embed_dim; ++i) {
            const auto f = fields[static_cast<std::size_t>(i) + 1];
            const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v[i]);
            if (ec != std::errc{} || ptr != f.data() + f.size())
                throw ParseError(path.string(), lineno, "value '" + std::string(f) + "' is not a number");
        }
        if (!v.allFinite()) throw ParseError(path.string(), lineno, "non-finite value");
        table.insert_or_assign(std::string(fields[0]), std::move(v));
    }
    return table;
}

EmbeddingMatrix build_embedding_matrix(const EmbeddingTable& table, const Vocabulary& vocab, int embed_dim) {
    EmbeddingMatrix m;
    m.vectors = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(vocab.size()), embed_dim);
    Rng rng(kFallbackEmbeddingSeed);
    std::size_t found = 0;
    for (std::size_t id = 1; id < vocab.size(); ++id) {
        const auto row = static_cast<Eigen::Index>(id);
        const auto it = id >= 2 ? table.find(vocab.token(static_cast<std::int32_t>(id))) : table.end();
        if (it != table.end()) {
            if (it->second.size() != embed_dim) throw std::invalid_argument("embedding table dimension mismatch");
            m.vectors.row(row) = it->second;
            ++found;
        } else {
            for (int j = 0; j < embed_dim; ++j) m.vectors(row, j) = uniform(rng, -0.05, 0.05);
        }
    }
    m.coverage = vocab.size() > 2 ? static_cast<double>(found) / static_cast<double>(vocab.size() - 2) : 0.0;
    return m;
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, int embed_dim) {
    const auto table =
        read_embedding_table(path, embed_dim, [&vocab](std::string_view w) { return vocab.contains(w); });
    return build_embedding_matrix(table, vocab, embed_dim);
}

std::vector<std::pair<std::string, double>> nearest_neighbor(std::string_view word, const EmbeddingMatrix& embedding,
                                                             const Vocabulary& vocab, std::size_t k) {
    if (!vocab.contains(word) || vocab.id(word) < 2)
        throw std::invalid_argument("nearest_neighbor: '" + std::string(word) + "' is not in the vocabulary");
    if (embedding.rows() != vocab.size())
        throw std::invalid_argument("nearest_neighbor: embedding rows do not match vocabulary size");
    const auto q = vocab.id(word);
    const Eigen::RowVectorXd query = embedding.vectors.row(q);
    const double qn = query.norm();
    std::vector<std::pair<std::int32_t, double>> scored;
    scored.reserve(vocab.size());
    for (std::size_t id = 2; id < vocab.size(); ++id) {
        if (static_cast<std::int32_t>(id) == q) continue;
        const auto row = embedding.vectors.row(static_cast<Eigen::Index>(id));
        const double denom = qn * row.norm();
        scored.emplace_back(static_cast<std::int32_t>(id), denom > 0.0 ? query.dot(row) / denom : 0.0);
    }
    const auto take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                      [](const auto& a, const auto& b) {
                          if (a.second != b.second) return a.second > b.second;
                          return a.first < b.first;
                      });
    std::vector<std::pair<std::string, double>> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.emplace_back(vocab.token(scored[i].first), scored[i].second);
    return out;
}

}  // namespace fedtext::textproc

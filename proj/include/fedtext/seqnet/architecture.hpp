// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fedtext::seqnet {

enum class CellKind { RNN, GRU, LSTM };

constexpr std::string_view to_string(CellKind kind) {
    switch (kind) {
        case CellKind::RNN: return "rnn";
        case CellKind::GRU: return "gru";
        case CellKind::LSTM: return "lstm";
    }
    return "?";
}

inline CellKind parse_cell_kind(std::string_view name) {
    if (name == "rnn" || name == "RNN") return CellKind::RNN;
    if (name == "gru" || name == "GRU") return CellKind::GRU;
    if (name == "lstm" || name == "LSTM") return CellKind::LSTM;
    throw std::invalid_argument("unknown cell kind '" + std::string(name) + "'");
}

/// Number of gate blocks stacked in the recurrent kernels.
constexpr int gate_count(CellKind kind) {
    switch (kind) {
        case CellKind::RNN: return 1;
        case CellKind::GRU: return 3;
        case CellKind::LSTM: return 4;
    }
    return 1;
}

/// Layer sizes for the embedding -> recurrent -> dense -> sigmoid classifier.
/// Defaults are the reference configuration (400 recurrent units, 300 dense
/// units, 0.25 dropout, 100-token sequences of 100-d embeddings).
struct ArchitectureSpec {
    CellKind cell_kind = CellKind::GRU;
    int embed_dim = 100;
    int recurrent_units = 400;
    int dense_units = 300;
    int num_classes = 3;
    double dropout_rate = 0.25;
    int max_seq_len = 100;

    void validate() const {
        if (embed_dim <= 0 || recurrent_units <= 0 || dense_units <= 0 || num_classes <= 0 ||
            max_seq_len <= 0)
            throw std::invalid_argument("architecture dimensions must be strictly positive");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
            throw std::invalid_argument("dropout_rate must be in [0, 1)");
    }

    /// Trainable scalars; the frozen embedding is not counted.
    std::size_t parameter_count() const {
        const auto g = static_cast<std::size_t>(gate_count(cell_kind));
        const auto e = static_cast<std::size_t>(embed_dim);
        const auto u = static_cast<std::size_t>(recurrent_units);
        const auto d = static_cast<std::size_t>(dense_units);
        const auto c = static_cast<std::size_t>(num_classes);
        return g * (e * u + u * u + u) + (u * d + d) + (d * c + c);
    }

    friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

}  // namespace fedtext::seqnet

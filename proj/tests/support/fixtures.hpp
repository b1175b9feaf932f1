// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "fedtext/rng.hpp"
#include "fedtext/seqnet/model.hpp"

namespace fedtext::testing {

inline seqnet::ArchitectureSpec tiny_arch(seqnet::CellKind kind, int units = 3, int seq_len = 3) {
    seqnet::ArchitectureSpec a;
    a.cell_kind = kind;
    a.embed_dim = 4;
    a.recurrent_units = units;
    a.dense_units = 5;
    a.num_classes = 3;
    a.dropout_rate = 0.25;
    a.max_seq_len = seq_len;
    return a;
}

/// Every entry, biases included, uniform in [-scale, scale].
inline seqnet::Parameters<double> random_params(const seqnet::ArchitectureSpec& arch, std::uint64_t seed,
                                                double scale = 0.8) {
    auto p = seqnet::Parameters<double>::zeros(arch);
    Rng rng(seed);
    for (auto& t : p)
        for (Eigen::Index i = 0; i < t.values.size(); ++i) t.values.data()[i] = uniform(rng, -scale, scale);
    return p;
}

inline Eigen::MatrixXd random_embedding(int vocab, int dim, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd e(vocab, dim);
    for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = uniform(rng, -1.0, 1.0);
    e.row(0).setZero();
    return e;
}

inline seqnet::EncodedBatch random_batch(int batch, int seq_len, int vocab, int classes, std::uint64_t seed) {
    Rng rng(seed);
    seqnet::EncodedBatch b;
    b.token_ids.resize(batch, seq_len);
    b.labels = Eigen::MatrixXd::Zero(batch, classes);
    for (int i = 0; i < batch; ++i) {
        for (int t = 0; t < seq_len; ++t)
            b.token_ids(i, t) = static_cast<std::int32_t>(uniform_index(rng, static_cast<std::uint64_t>(vocab)));
        b.labels(i, static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(classes)))) = 1.0;
    }
    return b;
}

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
};

/// Central finite differences of the loss against the analytic gradient,
/// over every trainable scalar. Relative error is |a - n| / max(|a|, |n|);
/// pairs where both magnitudes are below `floor` are compared absolutely
/// against `floor` instead.
inline GradCheckResult gradient_check(const seqnet::Parameters<double>& params, const Eigen::MatrixXd& embedding,
                                      const seqnet::EncodedBatch& batch, seqnet::ForwardMode mode,
                                      double eps = 1e-4, double floor = 1e-8) {
    const auto analytic = seqnet::loss_and_gradients(params, embedding, batch, mode).grads;
    auto probe = params;
    GradCheckResult r;
    for (std::size_t l = 0; l < probe.size(); ++l) {
        auto& t = probe[l].values;
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            const double saved = t.data()[i];
            t.data()[i] = saved + eps;
            const double up = seqnet::batch_loss(probe, embedding, batch, mode);
            t.data()[i] = saved - eps;
            const double down = seqnet::batch_loss(probe, embedding, batch, mode);
            t.data()[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[l].values.data()[i];
            const double scale = std::max(std::abs(a), std::abs(numeric));
            const double err = scale < floor ? std::abs(a - numeric) / floor : std::abs(a - numeric) / scale;
            r.max_relative_error = std::max(r.max_relative_error, err);
            ++r.checked;
        }
    }
    return r;
}

}  // namespace fedtext::testing

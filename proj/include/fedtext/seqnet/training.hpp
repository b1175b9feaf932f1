// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "fedtext/rng.hpp"
#include "fedtext/seqnet/adam.hpp"
#include "fedtext/seqnet/model.hpp"

namespace fedtext::seqnet {

struct LocalHyper {
    double learning_rate = 0.001;
    int batch_size = 32;
    /// Seeds the sample order and every dropout mask of the pass.
    std::uint64_t stream_seed = 0;
};

template <typename Scalar>
struct LocalTrainingResult {
    Parameters<Scalar> params;
    AdamState<Scalar> optimizer;
    std::size_t steps = 0;
    double mean_batch_loss = 0.0;
};

/// Rows `order[begin, end)` of `data` as a batch.
inline EncodedBatch gather_batch(const EncodedBatch& data, const std::vector<Eigen::Index>& order,
                                 std::size_t begin, std::size_t end) {
    EncodedBatch b;
    const auto n = static_cast<Eigen::Index>(end - begin);
    b.token_ids.resize(n, data.token_ids.cols());
    b.labels.resize(n, data.labels.cols());
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto src = order[begin + static_cast<std::size_t>(r)];
        b.token_ids.row(r) = data.token_ids.row(src);
        b.labels.row(r) = data.labels.row(src);
    }
    return b;
}

/// One pass over `shard` in batches of `batch_size` (the last batch may be
/// short), in an order drawn from `hyper.stream_seed`. Returns updated copies
/// of the parameters and optimizer state.
template <typename Scalar>
LocalTrainingResult<Scalar> train_local_epoch(const Parameters<Scalar>& start,
                                              const Matrix<Scalar>& embedding, const EncodedBatch& shard,
                                              const LocalHyper& hyper, AdamState<Scalar> optimizer) {
    if (shard.size() == 0) throw std::invalid_argument("train_local_epoch: empty shard");
    if (hyper.batch_size <= 0) throw std::invalid_argument("train_local_epoch: batch_size must be positive");

    Rng rng(hyper.stream_seed);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(shard.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    fedtext::shuffle(order, rng);

    LocalTrainingResult<Scalar> out{start, std::move(optimizer), 0, 0.0};
    const auto n = order.size();
    const auto bs = static_cast<std::size_t>(hyper.batch_size);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < n; begin += bs) {
        const auto batch = gather_batch(shard, order, begin, std::min(n, begin + bs));
        const auto dropout_seed = rng();
        auto lg = loss_and_gradients(out.params, embedding, batch, ForwardMode::training(dropout_seed));
        apply_adam(out.params, lg.grads, out.optimizer, hyper.learning_rate);
        loss_sum += static_cast<double>(lg.loss);
        ++out.steps;
    }
    out.mean_batch_loss = loss_sum / static_cast<double>(out.steps);
    return out;
}

template <typename Scalar>
LocalTrainingResult<Scalar> train_local_epoch(const Parameters<Scalar>& start,
                                              const Matrix<Scalar>& embedding, const EncodedBatch& shard,
                                              const LocalHyper& hyper) {
    return train_local_epoch(start, embedding, shard, hyper, AdamState<Scalar>::fresh(start.arch()));
}

/// Eval-mode mean loss over a whole data set, chunked to bound memory.
template <typename Scalar>
double dataset_loss(const Parameters<Scalar>& params, const Matrix<Scalar>& embedding,
                    const EncodedBatch& data, std::size_t chunk = 256) {
    if (data.size() == 0) throw std::invalid_argument("dataset_loss: empty data set");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(data.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    double total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += chunk) {
        const auto end = std::min(order.size(), begin + chunk);
        const auto batch = gather_batch(data, order, begin, end);
        total += static_cast<double>(batch_loss(params, embedding, batch)) * static_cast<double>(end - begin);
    }
    return total / static_cast<double>(order.size());
}

}  // namespace fedtext::seqnet

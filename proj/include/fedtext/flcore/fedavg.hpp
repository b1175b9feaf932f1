// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "fedtext/seqnet/parameters.hpp"
#include "fedtext/seqnet/training.hpp"

namespace fedtext::flcore {

template <typename Scalar>
struct Contribution {
    const seqnet::Parameters<Scalar>* params = nullptr;
    std::size_t size = 0;
};

/// Size-weighted mean of the contributions, tensor by tensor, summed in the
/// order given. Weights are size / (sum of sizes over the contributions).
template <typename Scalar>
seqnet::Parameters<Scalar> fedavg(std::span<const Contribution<Scalar>> contributions) {
    if (contributions.empty()) throw std::invalid_argument("fedavg: no contributions");
    std::size_t total = 0;
    for (const auto& c : contributions) {
        if (!c.params) throw std::invalid_argument("fedavg: null contribution");
        if (!c.params->same_layout(*contributions.front().params))
            throw std::invalid_argument("fedavg: parameter layouts differ");
        total += c.size;
    }
    if (total == 0) throw std::invalid_argument("fedavg: total size is zero");
    auto out = seqnet::Parameters<Scalar>::zeros(contributions.front().params->arch());
    for (const auto& c : contributions) {
        const Scalar w = static_cast<Scalar>(static_cast<double>(c.size) / static_cast<double>(total));
        for (std::size_t i = 0; i < out.size(); ++i) out[i].values += w * (*c.params)[i].values;
    }
    return out;
}

template <typename Scalar>
seqnet::Parameters<Scalar> fedavg(const std::vector<Contribution<Scalar>>& contributions) {
    return fedavg(std::span<const Contribution<Scalar>>(contributions));
}

struct ShardView {
    const seqnet::EncodedBatch* data = nullptr;
    const Eigen::MatrixXd* embedding = nullptr;
};

/// Size-weighted sum of per-shard eval-mode mean losses.
inline double global_objective(std::span<const ShardView> shards, const seqnet::Parameters<double>& params) {
    if (shards.empty()) throw std::invalid_argument("global_objective: no shards");
    double total = 0.0;
    for (const auto& s : shards) total += static_cast<double>(s.data->size());
    if (total == 0.0) throw std::invalid_argument("global_objective: all shards empty");
    double objective = 0.0;
    for (const auto& s : shards)
        if (s.data->size() > 0)
            objective += static_cast<double>(s.data->size()) / total * seqnet::dataset_loss(params, *s.embedding, *s.data);
    return objective;
}

}  // namespace fedtext::flcore

// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "fedtext/seqnet/parameters.hpp"

namespace fedtext::seqnet {

template <typename Scalar>
struct AdamState {
    Parameters<Scalar> first_moment;
    Parameters<Scalar> second_moment;
    std::uint64_t step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState fresh(const ArchitectureSpec& arch) {
        AdamState s;
        s.first_moment = Parameters<Scalar>::zeros(arch);
        s.second_moment = Parameters<Scalar>::zeros(arch);
        return s;
    }
};

/// In-place bias-corrected Adam update. Throws before touching anything if
/// the gradient contains NaN or Inf.
template <typename Scalar>
void apply_adam(Parameters<Scalar>& params, const Parameters<Scalar>& grads, AdamState<Scalar>& state,
                double learning_rate) {
    if (!params.same_layout(grads) || !params.same_layout(state.first_moment) ||
        !params.same_layout(state.second_moment))
        throw std::invalid_argument("adam: parameter, gradient and moment layouts differ");
    for (const auto& g : grads)
        if (!g.values.allFinite()) throw std::domain_error("adam: non-finite gradient in " + g.name);

    state.step_count += 1;
    const auto t = static_cast<double>(state.step_count);
    const Scalar b1 = static_cast<Scalar>(state.beta1);
    const Scalar b2 = static_cast<Scalar>(state.beta2);
    const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(state.beta1, t));
    const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(state.beta2, t));
    const Scalar lr = static_cast<Scalar>(learning_rate);
    const Scalar eps = static_cast<Scalar>(state.epsilon);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto m = state.first_moment[i].values.array();
        auto v = state.second_moment[i].values.array();
        const auto g = grads[i].values.array();
        m = b1 * m + (Scalar(1) - b1) * g;
        v = b2 * v + (Scalar(1) - b2) * g.square();
        params[i].values.array() -= lr * (m / c1) / ((v / c2).sqrt() + eps);
    }
}

template <typename Scalar>
struct AdamResult {
    Parameters<Scalar> params;
    AdamState<Scalar> state;
};

/// Pure form: returns updated copies, inputs untouched.
template <typename Scalar>
AdamResult<Scalar> adam_step(const Parameters<Scalar>& params, const Parameters<Scalar>& grads,
                             const AdamState<Scalar>& state, double learning_rate) {
    AdamResult<Scalar> out{params, state};
    apply_adam(out.params, grads, out.state, learning_rate);
    return out;
}

}  // namespace fedtext::seqnet

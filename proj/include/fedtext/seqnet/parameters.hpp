// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedtext/rng.hpp"
#include "fedtext/seqnet/architecture.hpp"

namespace fedtext::seqnet {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// One named trainable tensor. Rank-1 tensors (biases) are stored as 1 x n.
template <typename Scalar>
struct Tensor {
    std::string name;
    int rank = 2;
    Matrix<Scalar> values;

    Eigen::Index size() const { return values.size(); }
};

/// Indices into the fixed layer order.
enum LayerIndex : std::size_t {
    kRecurrentKernel = 0,
    kRecurrentRecurrentKernel,
    kRecurrentBias,
    kDenseKernel,
    kDenseBias,
    kOutputKernel,
    kOutputBias,
    kLayerCount
};

/// Ordered set of trainable tensors for one architecture. The layout (names,
/// order, shapes) is a pure function of the architecture. Gate blocks are
/// stacked column-wise in the recurrent kernels: GRU as [update, reset,
/// candidate], LSTM as [input, forget, cell, output].
template <typename Scalar>
class Parameters {
public:
    Parameters() = default;

    /// All-zero parameters with the layout of `arch`.
    static Parameters zeros(const ArchitectureSpec& arch) {
        arch.validate();
        Parameters p;
        p.arch_ = arch;
        const int g = gate_count(arch.cell_kind);
        const int e = arch.embed_dim, u = arch.recurrent_units, d = arch.dense_units,
                  c = arch.num_classes;
        auto add = [&](std::string name, int rank, int rows, int cols) {
            p.layers_.push_back({std::move(name), rank, Matrix<Scalar>::Zero(rows, cols)});
        };
        add("recurrent/kernel", 2, e, g * u);
        add("recurrent/recurrent_kernel", 2, u, g * u);
        add("recurrent/bias", 1, 1, g * u);
        add("dense/kernel", 2, u, d);
        add("dense/bias", 1, 1, d);
        add("output/kernel", 2, d, c);
        add("output/bias", 1, 1, c);
        return p;
    }

    const ArchitectureSpec& arch() const { return arch_; }
    std::size_t size() const { return layers_.size(); }
    Tensor<Scalar>& operator[](std::size_t i) { return layers_[i]; }
    const Tensor<Scalar>& operator[](std::size_t i) const { return layers_[i]; }
    std::vector<Tensor<Scalar>>& layers() { return layers_; }
    const std::vector<Tensor<Scalar>>& layers() const { return layers_; }

    auto begin() { return layers_.begin(); }
    auto end() { return layers_.end(); }
    auto begin() const { return layers_.begin(); }
    auto end() const { return layers_.end(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& t : layers_) n += static_cast<std::size_t>(t.size());
        return n;
    }

    bool same_layout(const Parameters& other) const {
        if (layers_.size() != other.layers_.size()) return false;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const auto& a = layers_[i];
            const auto& b = other.layers_[i];
            if (a.name != b.name || a.rank != b.rank || a.values.rows() != b.values.rows() ||
                a.values.cols() != b.values.cols())
                return false;
        }
        return true;
    }

    bool all_finite() const {
        for (const auto& t : layers_)
            if (!t.values.allFinite()) return false;
        return true;
    }

    /// Concatenation of every tensor in layer order, column-major within a tensor.
    Vector<Scalar> flatten() const {
        Vector<Scalar> flat(static_cast<Eigen::Index>(parameter_count()));
        Eigen::Index offset = 0;
        for (const auto& t : layers_) {
            flat.segment(offset, t.size()) = t.values.reshaped();
            offset += t.size();
        }
        return flat;
    }

    void assign_flat(const Eigen::Ref<const Vector<Scalar>>& flat) {
        if (flat.size() != static_cast<Eigen::Index>(parameter_count()))
            throw std::invalid_argument("flat parameter vector has wrong length");
        Eigen::Index offset = 0;
        for (auto& t : layers_) {
            t.values.reshaped() = flat.segment(offset, t.size());
            offset += t.size();
        }
    }

    template <typename Other>
    Parameters<Other> cast() const {
        Parameters<Other> out = Parameters<Other>::zeros(arch_);
        for (std::size_t i = 0; i < layers_.size(); ++i)
            out[i].values = layers_[i].values.template cast<Other>();
        return out;
    }

    void set_zero() {
        for (auto& t : layers_) t.values.setZero();
    }

    friend bool operator==(const Parameters& a, const Parameters& b) {
        if (!(a.arch_ == b.arch_) || !a.same_layout(b)) return false;
        for (std::size_t i = 0; i < a.layers_.size(); ++i)
            if (a.layers_[i].values != b.layers_[i].values) return false;
        return true;
    }

private:
    ArchitectureSpec arch_;
    std::vector<Tensor<Scalar>> layers_;
};

/// Largest absolute elementwise difference between two same-layout sets.
template <typename Scalar>
Scalar max_abs_difference(const Parameters<Scalar>& a, const Parameters<Scalar>& b) {
    if (!a.same_layout(b)) throw std::invalid_argument("parameter layouts differ");
    Scalar worst = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, (a[i].values - b[i].values).cwiseAbs().maxCoeff());
    return worst;
}

/// Glorot-uniform weights per gate block, zero biases. Deterministic in
/// (arch, seed).
template <typename Scalar = double>
Parameters<Scalar> init_parameters(const ArchitectureSpec& arch, std::uint64_t seed) {
    auto p = Parameters<Scalar>::zeros(arch);
    Rng rng(derive_seed(seed, {0x1417}));
    auto glorot = [&rng](auto block, int fan_in, int fan_out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (Eigen::Index j = 0; j < block.cols(); ++j)
            for (Eigen::Index i = 0; i < block.rows(); ++i)
                block(i, j) = static_cast<Scalar>(uniform(rng, -limit, limit));
    };
    const int g = gate_count(arch.cell_kind);
    const int e = arch.embed_dim, u = arch.recurrent_units;
    for (int k = 0; k < g; ++k) {
        glorot(p[kRecurrentKernel].values.middleCols(k * u, u), e, u);
        glorot(p[kRecurrentRecurrentKernel].values.middleCols(k * u, u), u, u);
    }
    glorot(p[kDenseKernel].values.leftCols(arch.dense_units), u, arch.dense_units);
    glorot(p[kOutputKernel].values.leftCols(arch.num_classes), arch.dense_units, arch.num_classes);
    return p;
}

}  // namespace fedtext::seqnet

// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "fedtext/rng.hpp"
#include "fedtext/seqnet/cells.hpp"
#include "fedtext/seqnet/parameters.hpp"

namespace fedtext::seqnet {

using TokenMatrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A batch of padded token-id rows with one-hot targets.
struct EncodedBatch {
    TokenMatrix token_ids;   // batch x max_seq_len
    Eigen::MatrixXd labels;  // batch x num_classes, one-hot

    Eigen::Index size() const { return token_ids.rows(); }
};

struct ForwardMode {
    bool train = false;
    std::uint64_t seed = 0;

    static ForwardMode eval() { return {}; }
    static ForwardMode training(std::uint64_t seed) { return {true, seed}; }
};

/// Everything the backward pass needs. Per-step blocks are stacked row-wise:
/// rows [t*B, (t+1)*B) belong to step t.
template <typename Scalar>
struct ActivationCache {
    Eigen::Index batch = 0;
    int steps = 0;
    bool train = false;
    Matrix<Scalar> x_all;      // T*B x E
    Matrix<Scalar> h_all;      // (T+1)*B x U, block 0 is the zero initial state
    Matrix<Scalar> c_all;      // LSTM cell state, same layout as h_all
    Matrix<Scalar> gates_all;  // T*B x gU gate activations
    Matrix<Scalar> rh_all;     // GRU r * h_prev, T*B x U
    Matrix<Scalar> mask1;      // dropout mask on the final hidden state (scaled)
    Matrix<Scalar> head_in;    // masked final hidden state, input to the dense layer
    Matrix<Scalar> dense_pre;
    Matrix<Scalar> mask2;
    Matrix<Scalar> dense_out;  // relu(dense_pre) * mask2
    Matrix<Scalar> logits;
};

template <typename Scalar>
struct ForwardResult {
    Matrix<Scalar> scores;  // batch x num_classes, each in (0, 1)
    ActivationCache<Scalar> cache;
};

template <typename Scalar>
struct LossAndGradients {
    Scalar loss = 0;
    Parameters<Scalar> grads;
};

namespace detail {

template <typename Scalar>
void check_inputs(const Parameters<Scalar>& params, const Matrix<Scalar>& embedding,
                  const TokenMatrix& ids) {
    const auto& arch = params.arch();
    if (embedding.cols() != arch.embed_dim)
        throw std::invalid_argument("embedding width " + std::to_string(embedding.cols()) +
                                    " does not match embed_dim " + std::to_string(arch.embed_dim));
    if (ids.cols() != arch.max_seq_len)
        throw std::invalid_argument("token rows have length " + std::to_string(ids.cols()) +
                                    ", expected max_seq_len " + std::to_string(arch.max_seq_len));
    if (ids.size() == 0) return;
    const auto lo = ids.minCoeff();
    const auto hi = ids.maxCoeff();
    if (lo < 0 || hi >= embedding.rows())
        throw std::out_of_range("token id " + std::to_string(lo < 0 ? lo : hi) +
                                " out of range for vocabulary of size " + std::to_string(embedding.rows()));
}

template <typename Scalar>
Matrix<Scalar> dropout_mask(Rng& rng, Eigen::Index rows, Eigen::Index cols, double rate) {
    Matrix<Scalar> mask(rows, cols);
    const Scalar keep_scale = Scalar(1.0 / (1.0 - rate));
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            mask(i, j) = uniform01(rng) < rate ? Scalar(0) : keep_scale;
    return mask;
}

}  // namespace detail

/// embed -> recurrent layer (final state) -> dropout -> dense+relu -> dropout
/// -> dense+sigmoid. Dropout is inverted and only active in training mode.
template <typename Scalar>
ForwardResult<Scalar> forward(const Parameters<Scalar>& params, const Matrix<Scalar>& embedding,
                              const TokenMatrix& ids, ForwardMode mode) {
    detail::check_inputs(params, embedding, ids);
    const auto& arch = params.arch();
    const Eigen::Index B = ids.rows();
    const int T = arch.max_seq_len;
    const Eigen::Index U = arch.recurrent_units;
    const Eigen::Index gU = gate_count(arch.cell_kind) * U;
    const auto& Wh = params[kRecurrentRecurrentKernel].values;

    ForwardResult<Scalar> out;
    auto& c = out.cache;
    c.batch = B;
    c.steps = T;
    c.train = mode.train;

    c.x_all.resize(T * B, arch.embed_dim);
    for (int t = 0; t < T; ++t)
        for (Eigen::Index b = 0; b < B; ++b) c.x_all.row(t * B + b) = embedding.row(ids(b, t));
    Matrix<Scalar> xw_all = c.x_all * params[kRecurrentKernel].values;
    xw_all.rowwise() += params[kRecurrentBias].values.row(0);

    c.h_all = Matrix<Scalar>::Zero((T + 1) * B, U);
    c.gates_all.resize(T * B, gU);
    if (arch.cell_kind == CellKind::LSTM) c.c_all = Matrix<Scalar>::Zero((T + 1) * B, U);
    if (arch.cell_kind == CellKind::GRU) c.rh_all.resize(T * B, U);

    Matrix<Scalar> xw, h_prev, c_prev, gates(B, gU), rh, h_new, c_new;
    for (int t = 0; t < T; ++t) {
        xw = xw_all.middleRows(t * B, B);
        h_prev = c.h_all.middleRows(t * B, B);
        switch (arch.cell_kind) {
            case CellKind::RNN:
                detail::rnn_step(xw, h_prev, Wh, h_new);
                break;
            case CellKind::GRU:
                detail::gru_step(xw, h_prev, Wh, gates, rh, h_new);
                c.gates_all.middleRows(t * B, B) = gates;
                c.rh_all.middleRows(t * B, B) = rh;
                break;
            case CellKind::LSTM:
                c_prev = c.c_all.middleRows(t * B, B);
                detail::lstm_step(xw, h_prev, c_prev, Wh, gates, c_new, h_new);
                c.gates_all.middleRows(t * B, B) = gates;
                c.c_all.middleRows((t + 1) * B, B) = c_new;
                break;
        }
        c.h_all.middleRows((t + 1) * B, B) = h_new;
    }

    const Eigen::Index D = arch.dense_units;
    Rng rng(mode.seed);
    c.head_in = c.h_all.bottomRows(B);
    if (mode.train) {
        c.mask1 = detail::dropout_mask<Scalar>(rng, B, U, arch.dropout_rate);
        c.head_in = c.head_in.cwiseProduct(c.mask1);
    }
    c.dense_pre = c.head_in * params[kDenseKernel].values;
    c.dense_pre.rowwise() += params[kDenseBias].values.row(0);
    c.dense_out = c.dense_pre.cwiseMax(Scalar(0));
    if (mode.train) {
        c.mask2 = detail::dropout_mask<Scalar>(rng, B, D, arch.dropout_rate);
        c.dense_out = c.dense_out.cwiseProduct(c.mask2);
    }
    c.logits = c.dense_out * params[kOutputKernel].values;
    c.logits.rowwise() += params[kOutputBias].values.row(0);
    out.scores = sigmoid(c.logits.array()).matrix();
    return out;
}

template <typename Scalar>
ForwardResult<Scalar> forward(const Parameters<Scalar>& params, const Matrix<Scalar>& embedding,
                              const EncodedBatch& batch, ForwardMode mode) {
    return forward(params, embedding, batch.token_ids, mode);
}

/// Mean binary cross-entropy over samples and classes, evaluated from logits.
template <typename Scalar>
Scalar bce_from_logits(const Matrix<Scalar>& logits, const Matrix<Scalar>& targets) {
    const auto l = logits.array();
    const auto y = targets.array();
    const auto per = l.cwiseMax(Scalar(0)) - l * y + (-(l.abs())).exp().log1p();
    return per.sum() / static_cast<Scalar>(logits.size());
}

/// Backpropagation through the head and all recurrent steps. `dlogits` is the
/// loss gradient w.r.t. the pre-sigmoid outputs.
template <typename Scalar>
Parameters<Scalar> backward(const Parameters<Scalar>& params, const ActivationCache<Scalar>& c,
                            const Matrix<Scalar>& dlogits) {
    const auto& arch = params.arch();
    const Eigen::Index B = c.batch;
    const int T = c.steps;
    const Eigen::Index U = arch.recurrent_units;
    const Eigen::Index gU = gate_count(arch.cell_kind) * U;
    auto g = Parameters<Scalar>::zeros(arch);

    g[kOutputKernel].values.noalias() = c.dense_out.transpose() * dlogits;
    g[kOutputBias].values = dlogits.colwise().sum();
    Matrix<Scalar> d_dense = dlogits * params[kOutputKernel].values.transpose();
    if (c.train) d_dense = d_dense.cwiseProduct(c.mask2);
    d_dense = (c.dense_pre.array() > Scalar(0)).select(d_dense, Scalar(0));
    g[kDenseKernel].values.noalias() = c.head_in.transpose() * d_dense;
    g[kDenseBias].values = d_dense.colwise().sum();
    Matrix<Scalar> dh = d_dense * params[kDenseKernel].values.transpose();
    if (c.train) dh = dh.cwiseProduct(c.mask1);

    const auto& Wh = params[kRecurrentRecurrentKernel].values;
    Matrix<Scalar> da_all(T * B, gU);
    Matrix<Scalar> dc = Matrix<Scalar>::Zero(B, U);
    Matrix<Scalar> da(B, gU);
    for (int t = T - 1; t >= 0; --t) {
        const auto h_prev = c.h_all.middleRows(t * B, B).array();
        switch (arch.cell_kind) {
            case CellKind::RNN: {
                const auto h_t = c.h_all.middleRows((t + 1) * B, B).array();
                da = (h_t > Scalar(0)).select(dh.array(), Scalar(0)).matrix();
                dh.noalias() = da * Wh.transpose();
                break;
            }
            case CellKind::GRU: {
                const auto gates = c.gates_all.middleRows(t * B, B);
                const auto z = gates.leftCols(U).array();
                const auto r = gates.middleCols(U, U).array();
                const auto cand = gates.rightCols(U).array();
                da.rightCols(U) = (dh.array() * z * (Scalar(1) - cand.square())).matrix();
                da.leftCols(U) = (dh.array() * (cand - h_prev) * z * (Scalar(1) - z)).matrix();
                const Matrix<Scalar> drh = da.rightCols(U) * Wh.rightCols(U).transpose();
                da.middleCols(U, U) = (drh.array() * h_prev * r * (Scalar(1) - r)).matrix();
                Matrix<Scalar> dh_prev = (dh.array() * (Scalar(1) - z) + drh.array() * r).matrix();
                dh_prev.noalias() += da.leftCols(2 * U) * Wh.leftCols(2 * U).transpose();
                dh = std::move(dh_prev);
                break;
            }
            case CellKind::LSTM: {
                const auto gates = c.gates_all.middleRows(t * B, B);
                const auto i = gates.leftCols(U).array();
                const auto f = gates.middleCols(U, U).array();
                const auto gg = gates.middleCols(2 * U, U).array();
                const auto o = gates.rightCols(U).array();
                const auto c_prev = c.c_all.middleRows(t * B, B).array();
                const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> tc =
                    c.c_all.middleRows((t + 1) * B, B).array().tanh();
                const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> dct =
                    dc.array() + dh.array() * o * (Scalar(1) - tc.square());
                da.leftCols(U) = (dct * gg * i * (Scalar(1) - i)).matrix();
                da.middleCols(U, U) = (dct * c_prev * f * (Scalar(1) - f)).matrix();
                da.middleCols(2 * U, U) = (dct * i * (Scalar(1) - gg.square())).matrix();
                da.rightCols(U) = (dh.array() * tc * o * (Scalar(1) - o)).matrix();
                dc = (dct * f).matrix();
                dh.noalias() = da * Wh.transpose();
                break;
            }
        }
        da_all.middleRows(t * B, B) = da;
    }

    g[kRecurrentKernel].values.noalias() = c.x_all.transpose() * da_all;
    g[kRecurrentBias].values = da_all.colwise().sum();
    const auto h_prev_all = c.h_all.topRows(T * B);
    if (arch.cell_kind == CellKind::GRU) {
        g[kRecurrentRecurrentKernel].values.leftCols(2 * U).noalias() =
            h_prev_all.transpose() * da_all.leftCols(2 * U);
        g[kRecurrentRecurrentKernel].values.rightCols(U).noalias() =
            c.rh_all.transpose() * da_all.rightCols(U);
    } else {
        g[kRecurrentRecurrentKernel].values.noalias() = h_prev_all.transpose() * da_all;
    }
    return g;
}

/// Mean per-class binary cross-entropy and its analytic gradient. The
/// embedding is frozen and receives no gradient.
template <typename Scalar>
LossAndGradients<Scalar> loss_and_gradients(const Parameters<Scalar>& params,
                                            const Matrix<Scalar>& embedding, const EncodedBatch& batch,
                                            ForwardMode mode) {
    if (batch.size() == 0) throw std::invalid_argument("loss_and_gradients: empty batch");
    if (batch.labels.rows() != batch.size() || batch.labels.cols() != params.arch().num_classes)
        throw std::invalid_argument("label matrix shape does not match batch");
    auto fwd = forward(params, embedding, batch.token_ids, mode);
    const Matrix<Scalar> targets = batch.labels.cast<Scalar>();
    LossAndGradients<Scalar> out;
    out.loss = bce_from_logits(fwd.cache.logits, targets);
    const Matrix<Scalar> dlogits = (fwd.scores - targets) / static_cast<Scalar>(targets.size());
    out.grads = backward(params, fwd.cache, dlogits);
    return out;
}

/// Loss only, no gradient.
template <typename Scalar>
Scalar batch_loss(const Parameters<Scalar>& params, const Matrix<Scalar>& embedding,
                  const EncodedBatch& batch, ForwardMode mode = ForwardMode::eval()) {
    if (batch.size() == 0) throw std::invalid_argument("batch_loss: empty batch");
    auto fwd = forward(params, embedding, batch.token_ids, mode);
    return bce_from_logits(fwd.cache.logits, Matrix<Scalar>(batch.labels.cast<Scalar>()));
}

/// Index of the largest score; ties go to the lowest index.
template <typename Derived>
int argmax_lowest(const Eigen::DenseBase<Derived>& row) {
    int best = 0;
    for (Eigen::Index j = 1; j < row.size(); ++j)
        if (row(j) > row(best)) best = static_cast<int>(j);
    return best;
}

template <typename Scalar>
int predict(const Parameters<Scalar>& params, const Matrix<Scalar>& embedding,
            const Eigen::Ref<const Eigen::Matrix<std::int32_t, 1, Eigen::Dynamic>>& token_ids) {
    TokenMatrix ids = token_ids;
    const auto fwd = forward(params, embedding, ids, ForwardMode::eval());
    return argmax_lowest(fwd.scores.row(0));
}

}  // namespace fedtext::seqnet

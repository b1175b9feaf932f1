// Copyright 2026 The fedtext Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <type_traits>

#include "fedtext/seqnet/parameters.hpp"

namespace fedtext::seqnet {

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& a) {
    using Scalar = typename Derived::Scalar;
    return (Scalar(1) + (-a).exp()).inverse();
}

namespace detail {

// Each step receives `xw`, the input projection x*W_x + b for every gate,
// already computed; only the recurrent product happens here.

template <typename Scalar>
void rnn_step(const Matrix<Scalar>& xw, const Matrix<Scalar>& h_prev,
              const Matrix<Scalar>& recurrent_kernel, Matrix<Scalar>& h_new) {
    h_new.noalias() = h_prev * recurrent_kernel;
    h_new += xw;
    h_new = h_new.cwiseMax(Scalar(0));
}

/// gates receives [z, r, candidate]; rh receives r * h_prev.
template <typename Scalar>
void gru_step(const Matrix<Scalar>& xw, const Matrix<Scalar>& h_prev,
              const Matrix<Scalar>& recurrent_kernel, Matrix<Scalar>& gates, Matrix<Scalar>& rh,
              Matrix<Scalar>& h_new) {
    const Eigen::Index u = h_prev.cols();
    gates.resize(xw.rows(), 3 * u);
    gates.leftCols(2 * u).noalias() = h_prev * recurrent_kernel.leftCols(2 * u);
    gates.leftCols(2 * u) += xw.leftCols(2 * u);
    gates.leftCols(2 * u) = sigmoid(gates.leftCols(2 * u).array()).matrix();
    rh = gates.middleCols(u, u).cwiseProduct(h_prev);
    gates.rightCols(u).noalias() = rh * recurrent_kernel.rightCols(u);
    gates.rightCols(u) += xw.rightCols(u);
    gates.rightCols(u) = gates.rightCols(u).array().tanh().matrix();
    const auto z = gates.leftCols(u).array();
    h_new = ((Scalar(1) - z) * h_prev.array() + z * gates.rightCols(u).array()).matrix();
}

/// gates receives [i, f, g, o] activations.
template <typename Scalar>
void lstm_step(const Matrix<Scalar>& xw, const Matrix<Scalar>& h_prev, const Matrix<Scalar>& c_prev,
               const Matrix<Scalar>& recurrent_kernel, Matrix<Scalar>& gates,
               Matrix<Scalar>& c_new, Matrix<Scalar>& h_new) {
    const Eigen::Index u = h_prev.cols();
    gates.noalias() = h_prev * recurrent_kernel;
    gates += xw;
    gates.leftCols(2 * u) = sigmoid(gates.leftCols(2 * u).array()).matrix();
    gates.middleCols(2 * u, u) = gates.middleCols(2 * u, u).array().tanh().matrix();
    gates.rightCols(u) = sigmoid(gates.rightCols(u).array()).matrix();
    const auto i = gates.leftCols(u).array();
    const auto f = gates.middleCols(u, u).array();
    const auto g = gates.middleCols(2 * u, u).array();
    const auto o = gates.rightCols(u).array();
    c_new = (f * c_prev.array() + i * g).matrix();
    h_new = (o * c_new.array().tanh()).matrix();
}

template <typename Scalar>
void check_cell_shapes(const Matrix<Scalar>& x, const Matrix<Scalar>& h_prev,
                       const Parameters<Scalar>& params, CellKind expected) {
    const auto& arch = params.arch();
    if (arch.cell_kind != expected)
        throw std::invalid_argument("cell step called with " + std::string(to_string(arch.cell_kind)) +
                                    " parameters, expected " + std::string(to_string(expected)));
    if (x.cols() != arch.embed_dim || h_prev.cols() != arch.recurrent_units || x.rows() != h_prev.rows())
        throw std::invalid_argument("cell step shape mismatch: x is " + std::to_string(x.rows()) + "x" +
                                    std::to_string(x.cols()) + ", h_prev is " +
                                    std::to_string(h_prev.rows()) + "x" + std::to_string(h_prev.cols()));
}

template <typename Scalar>
Matrix<Scalar> input_projection(const Matrix<Scalar>& x, const Parameters<Scalar>& params) {
    Matrix<Scalar> xw = x * params[kRecurrentKernel].values;
    xw.rowwise() += params[kRecurrentBias].values.row(0);
    return xw;
}

}  // namespace detail

// Single-step cell evaluations. Rows of x / h_prev are independent samples,
// so a single vector is a 1-row matrix. Scalar is deduced from the parameters.

template <typename Scalar>
using In = std::type_identity_t<Matrix<Scalar>>;

/// h_new = relu(x W_x + h_prev W_h + b)
template <typename Scalar>
Matrix<Scalar> rnn_cell_step(const In<Scalar>& x, const In<Scalar>& h_prev,
                             const Parameters<Scalar>& params) {
    detail::check_cell_shapes(x, h_prev, params, CellKind::RNN);
    Matrix<Scalar> h_new;
    detail::rnn_step(detail::input_projection(x, params), h_prev,
                     params[kRecurrentRecurrentKernel].values, h_new);
    return h_new;
}

template <typename Scalar>
Matrix<Scalar> gru_cell_step(const In<Scalar>& x, const In<Scalar>& h_prev,
                             const Parameters<Scalar>& params) {
    detail::check_cell_shapes(x, h_prev, params, CellKind::GRU);
    Matrix<Scalar> gates, rh, h_new;
    detail::gru_step(detail::input_projection(x, params), h_prev,
                     params[kRecurrentRecurrentKernel].values, gates, rh, h_new);
    return h_new;
}

template <typename Scalar>
struct LstmState {
    Matrix<Scalar> h;
    Matrix<Scalar> c;
};

template <typename Scalar>
LstmState<Scalar> lstm_cell_step(const In<Scalar>& x, const In<Scalar>& h_prev,
                                 const In<Scalar>& c_prev, const Parameters<Scalar>& params) {
    detail::check_cell_shapes(x, h_prev, params, CellKind::LSTM);
    if (c_prev.rows() != h_prev.rows() || c_prev.cols() != h_prev.cols())
        throw std::invalid_argument("cell step shape mismatch: c_prev does not match h_prev");
    Matrix<Scalar> gates(x.rows(), 4 * h_prev.cols());
    LstmState<Scalar> out;
    detail::lstm_step(detail::input_projection(x, params), h_prev, c_prev,
                      params[kRecurrentRecurrentKernel].values, gates, out.c, out.h);
    return out;
}

}  // namespace fedtext::seqnet

/* Copyright (c) 2026 The beatnet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#pragma once

#include "beatnet/nn/core.hpp"

namespace beatnet::nn {

template <typename Scalar>
struct AttentionOutput {
  Vector<Scalar> weights;  // a_t, length T, on the simplex
  Vector<Scalar> context;  // c = sum_t a_t h_t
};

template <typename Scalar>
struct AttentionCache {
  Matrix<Scalar> hidden;     // d x T
  Matrix<Scalar> projected;  // u_t = tanh(W h_t + b), d x T
  Vector<Scalar> weights;
};

// Additive soft attention over hidden states:
//   u_t = tanh(W h_t + b),  a = softmax_t(u_t . u_query),  c = sum_t a_t h_t
template <typename Scalar>
class AttentionLayer {
 public:
  Param<Scalar> weight;  // d x d
  Param<Scalar> bias;    // d x 1
  Param<Scalar> query;   // d x 1, the learned "most informative beat" vector

  AttentionLayer() = default;
  explicit AttentionLayer(Eigen::Index hidden) : weight(hidden, hidden), bias(hidden, 1), query(hidden, 1) {}

  Eigen::Index hidden() const noexcept { return weight.value.rows(); }

  void init(Rng& rng) {
    const Eigen::Index d = hidden();
    glorot_uniform<Scalar>(weight.value, d, d, rng);
    glorot_uniform<Scalar>(query.value, d, 1, rng);
    bias.value.setZero();
  }

  AttentionOutput<Scalar> forward(const Matrix<Scalar>& h, AttentionCache<Scalar>* cache = nullptr) const {
    if (h.cols() == 0) fail(Errc::EmptySequence, "attention over an empty sequence");
    require(h.rows() == hidden(), Errc::ShapeMismatch,
            fmt::format("attention input has {} rows, expected {}", h.rows(), hidden()));
    Matrix<Scalar> u = weight.value * h;
    u.colwise() += bias.value.col(0);
    u = u.array().tanh().matrix();
    const Vector<Scalar> scores = u.transpose() * query.value.col(0);
    AttentionOutput<Scalar> out;
    out.weights = softmax(scores);
    out.context = h * out.weights;
    if (cache) {
      cache->hidden = h;
      cache->projected = std::move(u);
      cache->weights = out.weights;
    }
    return out;
  }

  // dc: gradient w.r.t. the context vector. Returns dL/dH (d x T).
  Matrix<Scalar> backward(const AttentionCache<Scalar>& cache, const Vector<Scalar>& dc) {
    const auto& a = cache.weights;
    const auto& u = cache.projected;
    Matrix<Scalar> dh = dc * a.transpose();
    const Vector<Scalar> da = cache.hidden.transpose() * dc;
    const Vector<Scalar> ds = (a.array() * (da.array() - a.dot(da))).matrix();
    query.grad.col(0).noalias() += u * ds;
    const Matrix<Scalar> dpre =
        ((query.value.col(0) * ds.transpose()).array() * (Scalar(1) - u.array().square())).matrix();
    weight.grad.noalias() += dpre * cache.hidden.transpose();
    bias.grad.col(0) += dpre.rowwise().sum();
    dh.noalias() += weight.value.transpose() * dpre;
    return dh;
  }

  template <typename Fn>
  void for_each_param(Fn&& fn) {
    fn(weight);
    fn(bias);
    fn(query);
  }
  template <typename Fn>
  void for_each_param(Fn&& fn) const {
    fn(weight);
    fn(bias);
    fn(query);
  }

  template <typename T>
  AttentionLayer<T> cast() const {
    AttentionLayer<T> out;
    out.weight = weight.template cast<T>();
    out.bias = bias.template cast<T>();
    out.query = query.template cast<T>();
    return out;
  }
};

}  // namespace beatnet::nn

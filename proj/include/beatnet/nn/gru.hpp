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
struct GruCache {
  Matrix<Scalar> input;        // k x T
  Matrix<Scalar> hidden;       // d x T, h_1..h_T
  Matrix<Scalar> masked_prev;  // d x T, h_{t-1} * recurrent mask
  Matrix<Scalar> update;       // z_t
  Matrix<Scalar> reset;        // r_t
  Matrix<Scalar> candidate;    // h~_t
  Vector<Scalar> mask;         // empty when no recurrent dropout
};

// Gated recurrent unit with gates stacked as [update; reset; candidate]:
//   z = sig(Wz x + Uz m(h)),  r = sig(Wr x + Ur m(h)),
//   h~ = tanh(Wh x + Uh (r * m(h))),  h' = (1 - z) * h + z * h~
// where m() applies the per-sequence recurrent dropout mask and h_0 = 0.
template <typename Scalar>
class GruLayer {
 public:
  Param<Scalar> input_weight;      // 3d x k
  Param<Scalar> recurrent_weight;  // 3d x d
  Param<Scalar> bias;              // 3d x 1

  GruLayer() = default;
  GruLayer(Eigen::Index input_dim, Eigen::Index hidden)
      : input_weight(3 * hidden, input_dim), recurrent_weight(3 * hidden, hidden), bias(3 * hidden, 1) {}

  Eigen::Index input_dim() const noexcept { return input_weight.value.cols(); }
  Eigen::Index hidden() const noexcept { return recurrent_weight.value.cols(); }

  void init(Rng& rng) {
    const Eigen::Index d = hidden();
    for (Eigen::Index g = 0; g < 3; ++g) {
      glorot_uniform<Scalar>(input_weight.value.middleRows(g * d, d), input_dim(), d, rng);
      glorot_uniform<Scalar>(recurrent_weight.value.middleRows(g * d, d), d, d, rng);
    }
    bias.value.setZero();
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, const Vector<Scalar>* mask = nullptr,
                         GruCache<Scalar>* cache = nullptr) const {
    const Eigen::Index d = hidden();
    const Eigen::Index steps = x.cols();
    if (steps == 0) fail(Errc::EmptySequence, "GRU input has no time steps");
    require(x.rows() == input_dim(), Errc::ShapeMismatch,
            fmt::format("GRU input has {} features, expected {}", x.rows(), input_dim()));
    require(mask == nullptr || mask->size() == d, Errc::ShapeMismatch, "recurrent mask size mismatch");

    Matrix<Scalar> projected = input_weight.value * x;
    projected.colwise() += bias.value.col(0);
    const auto& u = recurrent_weight.value;

    Matrix<Scalar> hidden_states(d, steps);
    if (cache) {
      cache->input = x;
      cache->masked_prev.resize(d, steps);
      cache->update.resize(d, steps);
      cache->reset.resize(d, steps);
      cache->candidate.resize(d, steps);
      cache->mask = mask ? *mask : Vector<Scalar>();
    }
    Vector<Scalar> h = Vector<Scalar>::Zero(d);
    Vector<Scalar> hm(d), gates(2 * d), z(d), r(d), c(d);
    for (Eigen::Index t = 0; t < steps; ++t) {
      hm = mask ? Vector<Scalar>(h.cwiseProduct(*mask)) : h;
      gates.noalias() = u.topRows(2 * d) * hm;
      gates += projected.col(t).head(2 * d);
      z = sigmoid(gates.head(d).array()).matrix();
      r = sigmoid(gates.tail(d).array()).matrix();
      c.noalias() = u.bottomRows(d) * r.cwiseProduct(hm);
      c = (c + projected.col(t).tail(d)).array().tanh().matrix();
      if (cache) {
        cache->masked_prev.col(t) = hm;
        cache->update.col(t) = z;
        cache->reset.col(t) = r;
        cache->candidate.col(t) = c;
      }
      h = (Scalar(1) - z.array()) * h.array() + z.array() * c.array();
      hidden_states.col(t) = h;
    }
    if (cache) cache->hidden = hidden_states;
    return hidden_states;
  }

  // Back-propagation through time. dh: d x T gradient w.r.t. every h_t.
  Matrix<Scalar> backward(const GruCache<Scalar>& cache, const Matrix<Scalar>& dh) {
    const Eigen::Index d = hidden();
    const Eigen::Index steps = cache.hidden.cols();
    const auto& u = recurrent_weight.value;
    const bool masked = cache.mask.size() == d;

    Matrix<Scalar> dproj(3 * d, steps);
    Vector<Scalar> carry = Vector<Scalar>::Zero(d);
    Vector<Scalar> h_prev(d), g(d), dz(d), dc(d), dr(d), dhm(d), drh(d), da(3 * d);
    for (Eigen::Index t = steps - 1; t >= 0; --t) {
      const auto z = cache.update.col(t).array();
      const auto r = cache.reset.col(t).array();
      const auto c = cache.candidate.col(t).array();
      const auto hm = cache.masked_prev.col(t).array();
      if (t > 0) {
        h_prev = cache.hidden.col(t - 1);
      } else {
        h_prev.setZero();
      }
      g = dh.col(t) + carry;

      dz = (g.array() * (c - h_prev.array())).matrix();
      dc = (g.array() * z).matrix();
      carry = (g.array() * (Scalar(1) - z)).matrix();

      da.segment(2 * d, d) = (dc.array() * (Scalar(1) - c.square())).matrix();
      drh.noalias() = u.bottomRows(d).transpose() * da.segment(2 * d, d);
      dr = (drh.array() * hm).matrix();
      dhm = (drh.array() * r).matrix();
      da.head(d) = (dz.array() * z * (Scalar(1) - z)).matrix();
      da.segment(d, d) = (dr.array() * r * (Scalar(1) - r)).matrix();

      recurrent_weight.grad.topRows(2 * d).noalias() += da.head(2 * d) * cache.masked_prev.col(t).transpose();
      recurrent_weight.grad.bottomRows(d).noalias() +=
          da.segment(2 * d, d) * (r * hm).matrix().transpose();
      dhm.noalias() += u.topRows(2 * d).transpose() * da.head(2 * d);
      if (masked) {
        carry += dhm.cwiseProduct(cache.mask);
      } else {
        carry += dhm;
      }
      dproj.col(t) = da;
    }
    input_weight.grad.noalias() += dproj * cache.input.transpose();
    bias.grad.col(0) += dproj.rowwise().sum();
    return input_weight.value.transpose() * dproj;
  }

  template <typename Fn>
  void for_each_param(Fn&& fn) {
    fn(input_weight);
    fn(recurrent_weight);
    fn(bias);
  }
  template <typename Fn>
  void for_each_param(Fn&& fn) const {
    fn(input_weight);
    fn(recurrent_weight);
    fn(bias);
  }

  template <typename T>
  GruLayer<T> cast() const {
    GruLayer<T> out;
    out.input_weight = input_weight.template cast<T>();
    out.recurrent_weight = recurrent_weight.template cast<T>();
    out.bias = bias.template cast<T>();
    return out;
  }
};

}  // namespace beatnet::nn

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

// y = act(W x + b) applied column-wise to a batch.
template <typename Scalar>
class DenseLayer {
 public:
  Param<Scalar> weight;  // out x in
  Param<Scalar> bias;    // out x 1
  Activation activation = Activation::Identity;

  DenseLayer() = default;
  DenseLayer(Eigen::Index in, Eigen::Index out, Activation act)
      : weight(out, in), bias(out, 1), activation(act) {}

  Eigen::Index in_dim() const noexcept { return weight.value.cols(); }
  Eigen::Index out_dim() const noexcept { return weight.value.rows(); }

  void init(Rng& rng) {
    glorot_uniform<Scalar>(weight.value, in_dim(), out_dim(), rng);
    bias.value.setZero();
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x) const {
    require(x.rows() == in_dim(), Errc::ShapeMismatch,
            fmt::format("dense input has {} rows, expected {}", x.rows(), in_dim()));
    Matrix<Scalar> z = weight.value * x;
    z.colwise() += bias.value.col(0);
    if (activation == Activation::Tanh) z = z.array().tanh().matrix();
    return z;
  }

  // Accumulates parameter gradients; returns dL/dx.
  Matrix<Scalar> backward(const Matrix<Scalar>& x, const Matrix<Scalar>& y, const Matrix<Scalar>& dy) {
    Matrix<Scalar> dz = dy;
    if (activation == Activation::Tanh) dz = (dy.array() * (Scalar(1) - y.array().square())).matrix();
    weight.grad.noalias() += dz * x.transpose();
    bias.grad.col(0) += dz.rowwise().sum();
    return weight.value.transpose() * dz;
  }

  template <typename Fn>
  void for_each_param(Fn&& fn) {
    fn(weight);
    fn(bias);
  }
  template <typename Fn>
  void for_each_param(Fn&& fn) const {
    fn(weight);
    fn(bias);
  }

  template <typename T>
  DenseLayer<T> cast() const {
    DenseLayer<T> out;
    out.weight = weight.template cast<T>();
    out.bias = bias.template cast<T>();
    out.activation = activation;
    return out;
  }
};

}  // namespace beatnet::nn

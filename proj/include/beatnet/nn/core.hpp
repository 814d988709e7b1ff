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

#include <Eigen/Core>

#include <cmath>
#include <fmt/format.h>
#include <random>
#include <span>
#include <vector>

#include "beatnet/errors.hpp"
#include "beatnet/random.hpp"

namespace beatnet::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// A trainable tensor and its accumulated gradient.
template <typename Scalar>
struct Param {
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  Param() = default;
  Param(Eigen::Index rows, Eigen::Index cols)
      : value(Matrix<Scalar>::Zero(rows, cols)), grad(Matrix<Scalar>::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const noexcept { return value.size(); }

  template <typename T>
  Param<T> cast() const {
    Param<T> p;
    p.value = value.template cast<T>();
    p.grad = grad.template cast<T>();
    return p;
  }
};

enum class Activation { Identity, Tanh };

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return (Scalar(1) + (-x).exp()).inverse();
}

// Max-subtracted softmax of a column vector.
template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

// Glorot-uniform initialisation of a rows x cols block.
template <typename Scalar>
void glorot_uniform(Eigen::Ref<Matrix<Scalar>> block, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index j = 0; j < block.cols(); ++j) {
    for (Eigen::Index i = 0; i < block.rows(); ++i) block(i, j) = Scalar(dist(rng));
  }
}

// w_c = N_total / (K * N_c) for K classes, so that sum_c w_c N_c = N_total.
inline std::vector<double> class_weights(std::span<const std::size_t> counts) {
  require(!counts.empty(), Errc::EmptyClass, "no classes given");
  std::size_t total = 0;
  for (auto c : counts) total += c;
  std::vector<double> w(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    require(counts[c] > 0, Errc::EmptyClass, fmt::format("class {} has no samples", c));
    w[c] = static_cast<double>(total) / (static_cast<double>(counts.size()) * static_cast<double>(counts[c]));
  }
  return w;
}

template <typename Scalar>
struct LossAndGradient {
  Scalar loss{0};
  Matrix<Scalar> gradient;  // C x n
};

// logits: C x n (one column per sample). loss = (1/n) sum_i w_{y_i} (-log p_i[y_i]).
template <typename Scalar>
LossAndGradient<Scalar> weighted_softmax_ce(const Matrix<Scalar>& logits, std::span<const int> labels,
                                            std::span<const Scalar> weights) {
  const Eigen::Index classes = logits.rows();
  const Eigen::Index n = logits.cols();
  require(static_cast<Eigen::Index>(labels.size()) == n, Errc::ShapeMismatch, "labels/logits count mismatch");
  require(static_cast<Eigen::Index>(weights.size()) == classes, Errc::ShapeMismatch, "weights/classes mismatch");
  using std::log;
  LossAndGradient<Scalar> out;
  out.gradient.resize(classes, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    require(y >= 0 && y < classes, Errc::LabelOutOfRange, fmt::format("label {} outside [0, {})", y, classes));
    const auto col = logits.col(i);
    const Scalar m = col.maxCoeff();
    const Scalar lse = m + log((col.array() - m).exp().sum());
    const Scalar w = weights[static_cast<std::size_t>(y)];
    out.loss += w * (lse - col[y]);
    Vector<Scalar> p = (col.array() - lse).exp().matrix();
    p[y] -= Scalar(1);
    out.gradient.col(i) = w * p / Scalar(n);
  }
  out.loss /= Scalar(n);
  return out;
}

}  // namespace beatnet::nn

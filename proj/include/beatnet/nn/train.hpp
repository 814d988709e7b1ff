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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "beatnet/nn/model.hpp"

namespace beatnet::nn {

// Adam with bias correction. State is laid out in for_each_param order.
template <typename Scalar>
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

  template <typename Model>
  void step(Model& model) {
    ++t_;
    const Scalar c1 = Scalar(1) - Scalar(std::pow(beta1_, static_cast<double>(t_)));
    const Scalar c2 = Scalar(1) - Scalar(std::pow(beta2_, static_cast<double>(t_)));
    std::size_t i = 0;
    model.for_each_param([&](Param<Scalar>& p) {
      if (i == m_.size()) {
        m_.push_back(Matrix<Scalar>::Zero(p.value.rows(), p.value.cols()));
        v_.push_back(Matrix<Scalar>::Zero(p.value.rows(), p.value.cols()));
      }
      auto& m = m_[i];
      auto& v = v_[i];
      m = Scalar(beta1_) * m + Scalar(1 - beta1_) * p.grad;
      v = Scalar(beta2_) * v + Scalar(1 - beta2_) * p.grad.cwiseAbs2();
      p.value.array() -= Scalar(lr_) * (m.array() / c1) / ((v.array() / c2).sqrt() + Scalar(eps_));
      ++i;
    });
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
  std::vector<Matrix<Scalar>> m_, v_;
};

template <typename Model>
double gradient_norm(const Model& model) {
  double sq = 0.0;
  model.for_each_param([&](const auto& p) { sq += static_cast<double>(p.grad.squaredNorm()); });
  return std::sqrt(sq);
}

template <typename Model>
void clip_gradients(Model& model, double max_norm) {
  if (max_norm <= 0) return;
  const double norm = gradient_norm(model);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    model.for_each_param([&](auto& p) { p.grad *= s; });
  }
}

struct SequenceSample {
  Eigen::MatrixXd features;  // k x T
  int label = 0;
};

struct TrainResult {
  std::vector<double> loss_history;  // mean weighted loss per epoch
};

// Inverted-dropout masks, held fixed over every time step of one sequence.
inline DropoutMasks<double> sample_masks(const SequenceModel<double>& model, const TrainConfig& config, Rng& rng) {
  auto mask = [&](Eigen::Index n, double p) {
    Eigen::VectorXd m(n);
    std::bernoulli_distribution keep(1.0 - p);
    for (Eigen::Index i = 0; i < n; ++i) m[i] = keep(rng) ? 1.0 / (1.0 - p) : 0.0;
    return m;
  };
  DropoutMasks<double> masks;
  for (const auto& g : model.recurrent) {
    masks.input.push_back(mask(g.input_dim(), config.dropout));
    masks.recurrent.push_back(mask(g.hidden(), config.recurrent_dropout));
  }
  for (const auto& d : model.dense) masks.dense.push_back(mask(d.in_dim(), config.dropout));
  return masks;
}

inline std::vector<std::size_t> label_counts(std::span<const SequenceSample> data, Eigen::Index n_classes) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes), 0);
  for (const auto& s : data) {
    require(s.label >= 0 && s.label < n_classes, Errc::LabelOutOfRange, fmt::format("label {} out of range", s.label));
    ++counts[static_cast<std::size_t>(s.label)];
  }
  return counts;
}

// Per-sequence Adam updates in a seeded shuffled order with class-weighted
// cross-entropy. `weights` defaults to class_weights() of the data.
inline TrainResult train(SequenceModel<double>& model, std::span<const SequenceSample> data, const TrainConfig& config,
                         std::vector<double> weights = {}) {
  config.validate();
  if (data.empty()) fail(Errc::EmptyDataset, "no training sequences");
  for (const auto& s : data) {
    require(s.features.rows() == model.shape.input_dim, Errc::ShapeMismatch, "inconsistent feature dimension");
    if (s.features.cols() == 0) fail(Errc::EmptySequence, "training sequence with no beats");
  }
  if (weights.empty()) weights = class_weights(label_counts(data, model.shape.n_classes));
  require(static_cast<Eigen::Index>(weights.size()) == model.shape.n_classes, Errc::ShapeMismatch,
          "class weight count mismatch");

  TrainResult result;
  Rng rng(derive_seed(config.seed, "train"));
  Adam<double> adam(config.learning_rate);
  const bool use_dropout = config.dropout > 0 || config.recurrent_dropout > 0;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (auto idx : order) {
      const auto& s = data[idx];
      model.zero_grad();
      double loss = 0.0;
      if (use_dropout) {
        const auto masks = sample_masks(model, config, rng);
        loss = model.loss_and_gradient(s.features, s.label, weights[static_cast<std::size_t>(s.label)], &masks);
      } else {
        loss = model.loss_and_gradient(s.features, s.label, weights[static_cast<std::size_t>(s.label)]);
      }
      if (!std::isfinite(loss) || !std::isfinite(gradient_norm(model))) {
        fail(Errc::NonFiniteLoss, fmt::format("non-finite loss at epoch {}", epoch + 1));
      }
      clip_gradients(model, config.clip_norm);
      adam.step(model);
      total += loss;
    }
    result.loss_history.push_back(total / static_cast<double>(data.size()));
  }
  return result;
}

inline int predict_label(const SequenceModel<double>& model, const Eigen::MatrixXd& features) {
  Eigen::Index best = 0;
  model.forward(features).probs.maxCoeff(&best);
  return static_cast<int>(best);
}

inline double accuracy(const SequenceModel<double>& model, std::span<const SequenceSample> data) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : data) hits += predict_label(model, s.features) == s.label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

// Max over parameters of |g_a - g_n| / max(1e-8, |g_a| + |g_n|), where g_a is
// the back-propagated gradient and g_n the central difference with step eps.
// Finite differences run in long double so that round-off stays well below
// the comparison tolerance.
template <typename Scalar>
double grad_check(const SequenceModel<Scalar>& model, const Matrix<Scalar>& x, int label, double weight,
                  double eps = 1e-5) {
  SequenceModel<Scalar> analytic = model;
  analytic.zero_grad();
  analytic.loss_and_gradient(x, label, Scalar(weight));

  using Wide = long double;
  SequenceModel<Wide> probe = model.template cast<Wide>();
  const Matrix<Wide> xw = x.template cast<Wide>();
  std::vector<Param<Wide>*> wide_params;
  probe.for_each_param([&](Param<Wide>& p) { wide_params.push_back(&p); });
  std::vector<const Param<Scalar>*> grads;
  analytic.for_each_param([&](const Param<Scalar>& p) { grads.push_back(&p); });

  double worst = 0.0;
  for (std::size_t k = 0; k < wide_params.size(); ++k) {
    auto& value = wide_params[k]->value;
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const Wide saved = value.data()[i];
      value.data()[i] = saved + Wide(eps);
      const Wide up = probe.loss(xw, label, Wide(weight));
      value.data()[i] = saved - Wide(eps);
      const Wide down = probe.loss(xw, label, Wide(weight));
      value.data()[i] = saved;
      const double numeric = static_cast<double>((up - down) / (Wide(2) * Wide(eps)));
      const double exact = static_cast<double>(grads[k]->grad.data()[i]);
      const double rel = std::abs(exact - numeric) / std::max(1e-8, std::abs(exact) + std::abs(numeric));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace beatnet::nn

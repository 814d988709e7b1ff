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

#include <cstdint>
#include <optional>
#include <vector>

#include "beatnet/nn/attention.hpp"
#include "beatnet/nn/core.hpp"
#include "beatnet/nn/dense.hpp"
#include "beatnet/nn/gru.hpp"

namespace beatnet::nn {

// Level-1 training hyperparameters. Defaults are the best reported
// configuration: 80 units, 5 recurrent layers, 35% dropout, 65% recurrent
// dropout, plus attention.
struct TrainConfig {
  double dropout = 0.35;
  double recurrent_dropout = 0.65;
  int hidden = 80;
  int recurrent_layers = 5;
  // Dense layers after the recurrent stack, counting the softmax output
  // layer: 1 = output layer only, 2 = one tanh layer of `hidden` units first.
  int forward_layers = 1;
  bool attention = true;
  int epochs = 30;
  double learning_rate = 1e-3;
  double clip_norm = 5.0;  // global gradient-norm clip, 0 disables
  std::uint64_t seed = 0;

  void validate() const {
    require(dropout >= 0 && dropout < 1 && recurrent_dropout >= 0 && recurrent_dropout < 1,
            Errc::InvalidConfig, "dropout fractions must lie in [0, 1)");
    require(hidden >= 1 && recurrent_layers >= 1, Errc::InvalidConfig, "hidden and recurrent_layers must be >= 1");
    require(forward_layers >= 1 && forward_layers <= 2, Errc::InvalidConfig, "forward_layers must be 1 or 2");
    require(epochs >= 0, Errc::InvalidConfig, "epochs must be >= 0");
    require(learning_rate > 0, Errc::InvalidConfig, "learning_rate must be > 0");
    require(clip_norm >= 0, Errc::InvalidConfig, "clip_norm must be >= 0");
  }
};

struct ModelShape {
  Eigen::Index input_dim = 0;
  Eigen::Index hidden = 0;
  int recurrent_layers = 1;
  int forward_layers = 1;
  bool attention = false;
  Eigen::Index n_classes = 2;

  bool operator==(const ModelShape&) const = default;
};

template <typename Scalar>
struct DropoutMasks {
  std::vector<Vector<Scalar>> input;      // one per recurrent layer (layer input width)
  std::vector<Vector<Scalar>> recurrent;  // one per recurrent layer (hidden width)
  std::vector<Vector<Scalar>> dense;      // one per dense layer (layer input width)
};

template <typename Scalar>
struct ModelTape {
  std::vector<GruCache<Scalar>> gru;
  AttentionCache<Scalar> attention;
  std::vector<Matrix<Scalar>> dense_in;
  std::vector<Matrix<Scalar>> dense_out;
  Vector<Scalar> probs;
  Vector<Scalar> logits;
  Eigen::Index steps = 0;
};

template <typename Scalar>
struct ModelOutput {
  Vector<Scalar> probs;
  Vector<Scalar> logits;
  Vector<Scalar> attention;  // a_t per beat; empty without an attention layer
};

// GRU stack -> optional attention -> dense layers -> softmax.
// Without attention the last hidden state h_T feeds the dense stack.
template <typename Scalar>
class SequenceModel {
 public:
  ModelShape shape;
  std::vector<GruLayer<Scalar>> recurrent;
  std::optional<AttentionLayer<Scalar>> attention;
  std::vector<DenseLayer<Scalar>> dense;

  SequenceModel() = default;
  explicit SequenceModel(const ModelShape& s) : shape(s) {
    Eigen::Index in = s.input_dim;
    for (int l = 0; l < s.recurrent_layers; ++l) {
      recurrent.emplace_back(in, s.hidden);
      in = s.hidden;
    }
    if (s.attention) attention.emplace(s.hidden);
    if (s.forward_layers == 2) dense.emplace_back(s.hidden, s.hidden, Activation::Tanh);
    dense.emplace_back(s.hidden, s.n_classes, Activation::Identity);
  }

  void init(Rng& rng) {
    for (auto& g : recurrent) g.init(rng);
    if (attention) attention->init(rng);
    for (auto& d : dense) d.init(rng);
  }

  ModelOutput<Scalar> forward(const Matrix<Scalar>& x, const DropoutMasks<Scalar>* masks = nullptr,
                              ModelTape<Scalar>* tape = nullptr) const {
    if (x.cols() == 0) fail(Errc::EmptySequence, "sequence has no beats");
    require(x.rows() == shape.input_dim, Errc::ShapeMismatch,
            fmt::format("sequence has {} features, model expects {}", x.rows(), shape.input_dim));
    if (tape) {
      tape->gru.resize(recurrent.size());
      tape->dense_in.resize(dense.size());
      tape->dense_out.resize(dense.size());
      tape->steps = x.cols();
    }
    Matrix<Scalar> current = x;
    for (std::size_t l = 0; l < recurrent.size(); ++l) {
      if (masks) current = (current.array().colwise() * masks->input[l].array()).matrix();
      current = recurrent[l].forward(current, masks ? &masks->recurrent[l] : nullptr, tape ? &tape->gru[l] : nullptr);
    }

    ModelOutput<Scalar> out;
    Matrix<Scalar> z;
    if (attention) {
      auto att = attention->forward(current, tape ? &tape->attention : nullptr);
      out.attention = att.weights;
      z = att.context;
    } else {
      z = current.col(current.cols() - 1);
    }
    for (std::size_t j = 0; j < dense.size(); ++j) {
      if (masks) z = z.cwiseProduct(masks->dense[j]);
      if (tape) tape->dense_in[j] = z;
      z = dense[j].forward(z);
      if (tape) tape->dense_out[j] = z;
    }
    out.logits = z.col(0);
    out.probs = softmax(out.logits);
    if (tape) {
      tape->probs = out.probs;
      tape->logits = out.logits;
    }
    return out;
  }

  // Accumulates gradients of weight * CE(label) from a recorded tape.
  void backward(const ModelTape<Scalar>& tape, int label, Scalar weight,
                const DropoutMasks<Scalar>* masks = nullptr) {
    Matrix<Scalar> dz = weight * tape.probs;
    dz(label, 0) -= weight;
    for (std::size_t j = dense.size(); j-- > 0;) {
      dz = dense[j].backward(tape.dense_in[j], tape.dense_out[j], dz);
      if (masks) dz = dz.cwiseProduct(masks->dense[j]);
    }
    Matrix<Scalar> dtop = Matrix<Scalar>::Zero(shape.hidden, tape.steps);
    if (attention) {
      dtop = attention->backward(tape.attention, dz.col(0));
    } else {
      dtop.col(tape.steps - 1) = dz.col(0);
    }
    for (std::size_t l = recurrent.size(); l-- > 0;) {
      dtop = recurrent[l].backward(tape.gru[l], dtop);
      if (masks) dtop = (dtop.array().colwise() * masks->input[l].array()).matrix();
    }
  }

  // weight * -log softmax(logits)[label]; gradients are accumulated.
  Scalar loss_and_gradient(const Matrix<Scalar>& x, int label, Scalar weight,
                           const DropoutMasks<Scalar>* masks = nullptr) {
    require(label >= 0 && label < shape.n_classes, Errc::LabelOutOfRange, fmt::format("label {} out of range", label));
    ModelTape<Scalar> tape;
    forward(x, masks, &tape);
    backward(tape, label, weight, masks);
    return loss_from_logits(tape.logits, label, weight);
  }

  Scalar loss(const Matrix<Scalar>& x, int label, Scalar weight) const {
    return loss_from_logits(forward(x).logits, label, weight);
  }

  static Scalar loss_from_logits(const Vector<Scalar>& logits, int label, Scalar weight) {
    using std::log;
    const Scalar m = logits.maxCoeff();
    const Scalar lse = m + log((logits.array() - m).exp().sum());
    return weight * (lse - logits[label]);
  }

  void zero_grad() {
    for_each_param([](Param<Scalar>& p) { p.zero_grad(); });
  }

  template <typename Fn>
  void for_each_param(Fn&& fn) {
    for (auto& g : recurrent) g.for_each_param(fn);
    if (attention) attention->for_each_param(fn);
    for (auto& d : dense) d.for_each_param(fn);
  }
  template <typename Fn>
  void for_each_param(Fn&& fn) const {
    for (const auto& g : recurrent) g.for_each_param(fn);
    if (attention) attention->for_each_param(fn);
    for (const auto& d : dense) d.for_each_param(fn);
  }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for_each_param([&](const Param<Scalar>& p) { n += p.size(); });
    return n;
  }

  template <typename T>
  SequenceModel<T> cast() const {
    SequenceModel<T> out;
    out.shape = shape;
    for (const auto& g : recurrent) out.recurrent.push_back(g.template cast<T>());
    if (attention) out.attention = attention->template cast<T>();
    for (const auto& d : dense) out.dense.push_back(d.template cast<T>());
    return out;
  }
};

// Glorot-uniform weights, zero biases, drawn from `config.seed`.
inline SequenceModel<double> build_model(const TrainConfig& config, Eigen::Index input_dim, Eigen::Index n_classes) {
  config.validate();
  require(input_dim >= 1 && n_classes >= 2, Errc::InvalidConfig, "input_dim >= 1 and n_classes >= 2 required");
  ModelShape shape;
  shape.input_dim = input_dim;
  shape.hidden = config.hidden;
  shape.recurrent_layers = config.recurrent_layers;
  shape.forward_layers = config.forward_layers;
  shape.attention = config.attention;
  shape.n_classes = n_classes;
  SequenceModel<double> model(shape);
  Rng rng(derive_seed(config.seed, "init"));
  model.init(rng);
  return model;
}

}  // namespace beatnet::nn

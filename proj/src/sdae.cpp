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

#include "beatnet/sdae.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>

#include "beatnet/errors.hpp"
#include "beatnet/io_util.hpp"
#include "beatnet/nn/model_io.hpp"
#include "beatnet/nn/train.hpp"
#include "beatnet/random.hpp"

namespace beatnet {

using nn::Activation;
using nn::DenseLayer;

void SdaeConfig::validate() const {
  require(hidden >= 1 && code >= 1, Errc::InvalidConfig, "SDAE widths must be >= 1");
  require(corruption_rate >= 0 && corruption_rate < 1, Errc::InvalidConfig, "corruption_rate must lie in [0, 1)");
  require(pretrain_epochs >= 0 && finetune_epochs >= 0, Errc::InvalidConfig, "epochs must be >= 0");
  require(batch_size >= 1, Errc::InvalidConfig, "batch_size must be >= 1");
  require(learning_rate > 0, Errc::InvalidConfig, "learning_rate must be > 0");
}

SdaeModel::SdaeModel(Eigen::Index input_dim, Eigen::Index hidden, Eigen::Index code)
    : encoder1(input_dim, hidden, Activation::Tanh),
      encoder2(hidden, code, Activation::Tanh),
      decoder2(code, hidden, Activation::Tanh),
      decoder1(hidden, input_dim, Activation::Identity) {}

Eigen::MatrixXd SdaeModel::encode_batch(const Eigen::MatrixXd& inputs) const {
  return encoder2.forward(encoder1.forward(inputs));
}

Eigen::MatrixXd SdaeModel::reconstruct_batch(const Eigen::MatrixXd& inputs) const {
  return decoder1.forward(decoder2.forward(encode_batch(inputs)));
}

std::vector<double> SdaeTrainResult::loss_history() const {
  std::vector<double> out = layer1_history;
  out.insert(out.end(), finetune_history.begin(), finetune_history.end());
  return out;
}

namespace {

// A chain of dense layers trained as one autoencoder.
struct Chain {
  std::vector<DenseLayer<double>*> layers;

  template <typename Fn>
  void for_each_param(Fn&& fn) {
    for (auto* l : layers) l->for_each_param(fn);
  }

  // Returns the MSE of the reconstruction of `target` from `input`, and
  // accumulates gradients.
  double step(const Eigen::MatrixXd& input, const Eigen::MatrixXd& target) {
    std::vector<Eigen::MatrixXd> acts{input};
    for (auto* l : layers) acts.push_back(l->forward(acts.back()));
    const Eigen::MatrixXd diff = acts.back() - target;
    const double denom = static_cast<double>(diff.size());
    Eigen::MatrixXd grad = 2.0 * diff / denom;
    for (std::size_t i = layers.size(); i-- > 0;) grad = layers[i]->backward(acts[i], acts[i + 1], grad);
    return diff.squaredNorm() / denom;
  }

  void zero_grad() {
    for_each_param([](nn::Param<double>& p) { p.zero_grad(); });
  }
};

Eigen::MatrixXd corrupt(const Eigen::MatrixXd& x, double rate, Rng& rng) {
  if (rate <= 0) return x;
  std::bernoulli_distribution drop(rate);
  Eigen::MatrixXd out = x;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (drop(rng)) out.data()[i] = 0.0;
  }
  return out;
}

// Mini-batch Adam over the columns of `data`; returns mean loss per epoch.
std::vector<double> fit(Chain chain, const Eigen::MatrixXd& data, const SdaeConfig& config, int epochs, Rng& rng) {
  std::vector<double> history;
  nn::Adam<double> adam(config.learning_rate);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(data.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto batch = static_cast<Eigen::Index>(config.batch_size);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    Eigen::Index seen = 0;
    for (Eigen::Index start = 0; start < data.cols(); start += batch) {
      const Eigen::Index n = std::min(batch, data.cols() - start);
      Eigen::MatrixXd clean(data.rows(), n);
      for (Eigen::Index j = 0; j < n; ++j) clean.col(j) = data.col(order[static_cast<std::size_t>(start + j)]);
      const Eigen::MatrixXd noisy = corrupt(clean, config.corruption_rate, rng);
      chain.zero_grad();
      const double loss = chain.step(noisy, clean);
      if (!std::isfinite(loss)) fail(Errc::NonFiniteLoss, "SDAE loss diverged");
      adam.step(chain);
      total += loss * static_cast<double>(n);
      seen += n;
    }
    history.push_back(total / static_cast<double>(seen));
  }
  return history;
}

}  // namespace

SdaeTrainResult train_sdae(std::span<const Eigen::VectorXd> inputs, const SdaeConfig& config,
                           std::string trained_on) {
  config.validate();
  if (inputs.size() < 32) {
    fail(Errc::InsufficientData, fmt::format("SDAE training needs >= 32 inputs, got {}", inputs.size()));
  }
  const Eigen::Index dim = inputs.front().size();
  for (const auto& v : inputs) {
    require(v.size() == dim, Errc::DimensionMismatch, "SDAE inputs must share one dimension");
  }
  require(dim >= 1, Errc::DimensionMismatch, "SDAE inputs are empty");

  Rng rng(derive_seed(config.seed, "sdae"));
  std::vector<std::size_t> chosen(inputs.size());
  std::iota(chosen.begin(), chosen.end(), std::size_t{0});
  if (config.max_inputs > 0 && chosen.size() > config.max_inputs) {
    std::shuffle(chosen.begin(), chosen.end(), rng);
    chosen.resize(config.max_inputs);
    std::sort(chosen.begin(), chosen.end());
  }
  Eigen::MatrixXd data(dim, static_cast<Eigen::Index>(chosen.size()));
  for (std::size_t j = 0; j < chosen.size(); ++j) data.col(static_cast<Eigen::Index>(j)) = inputs[chosen[j]];

  SdaeTrainResult result;
  SdaeModel& m = result.model;
  m = SdaeModel(dim, config.hidden, config.code);
  m.corruption_rate = config.corruption_rate;
  m.trained_on = std::move(trained_on);
  m.encoder1.init(rng);
  m.encoder2.init(rng);
  m.decoder2.init(rng);
  m.decoder1.init(rng);

  result.layer1_history = fit(Chain{{&m.encoder1, &m.decoder1}}, data, config, config.pretrain_epochs, rng);
  const Eigen::MatrixXd hidden = m.encoder1.forward(data);
  result.layer2_history = fit(Chain{{&m.encoder2, &m.decoder2}}, hidden, config, config.pretrain_epochs, rng);
  result.finetune_history = fit(Chain{{&m.encoder1, &m.encoder2, &m.decoder2, &m.decoder1}}, data, config,
                                config.finetune_epochs, rng);
  result.final_mse = (m.reconstruct_batch(data) - data).squaredNorm() / static_cast<double>(data.size());
  return result;
}

Eigen::VectorXd encode(const SdaeModel& model, const Eigen::VectorXd& input) {
  require(input.size() == model.input_dim(), Errc::DimensionMismatch,
          fmt::format("SDAE expects {} inputs, got {}", model.input_dim(), input.size()));
  return model.encode_batch(input).col(0);
}

double reconstruction_mse(const SdaeModel& model, std::span<const Eigen::VectorXd> inputs) {
  require(!inputs.empty(), Errc::EmptyDataset, "no inputs");
  double total = 0.0;
  double count = 0.0;
  for (const auto& v : inputs) {
    require(v.size() == model.input_dim(), Errc::DimensionMismatch, "SDAE input dimension mismatch");
    total += (model.reconstruct_batch(v) - v).squaredNorm();
    count += static_cast<double>(v.size());
  }
  return total / count;
}

void save_sdae(const SdaeModel& model, const std::filesystem::path& path) {
  require(model.hidden_dim() < 65536 && model.code_dim() < 65536, Errc::InvalidArgument, "SDAE too wide");
  io::BinaryWriter out;
  out.bytes("SDAE");
  out.u32(1);
  out.u32(static_cast<std::uint32_t>(model.input_dim()));
  out.u16(static_cast<std::uint16_t>(model.hidden_dim()));
  out.u16(static_cast<std::uint16_t>(model.code_dim()));
  model.for_each_param([&](const nn::Param<double>& p) { nn::write_row_major(out, p.value); });
  io::write_atomic(path, out.data());
}

SdaeModel load_sdae(const std::filesystem::path& path) {
  io::BinaryReader in(io::read_file(path));
  if (in.remaining() < 16 || in.bytes(4) != "SDAE") fail(Errc::InvalidModelFile, "missing SDAE magic");
  require(in.u32() == 1, Errc::InvalidModelFile, "unsupported SDAE version");
  const auto input_dim = in.u32();
  const auto hidden = in.u16();
  const auto code = in.u16();
  require(input_dim >= 1 && hidden >= 1 && code >= 1, Errc::InvalidModelFile, "invalid SDAE dimensions");
  SdaeModel model(input_dim, hidden, code);
  model.for_each_param([&](nn::Param<double>& p) { nn::read_row_major(in, p.value); });
  require(in.remaining() == 0, Errc::InvalidModelFile, "trailing bytes in SDAE file");
  return model;
}

}  // namespace beatnet

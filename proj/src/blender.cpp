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

#include <fmt/format.h>

#include <numeric>
#include <unordered_set>

#include "beatnet/errors.hpp"
#include "beatnet/io_util.hpp"
#include "beatnet/nn/model_io.hpp"
#include "beatnet/nn/train.hpp"
#include "beatnet/pipeline.hpp"
#include "beatnet/random.hpp"

namespace beatnet {

namespace {

constexpr char kBlenderMagic[4] = {'B', 'L', 'N', 'D'};
constexpr std::uint16_t kBlenderVersion = 1;

BlenderModel make_blender(Eigen::Index input_dim, int hidden, int hidden_layers) {
  BlenderModel m;
  Eigen::Index in = input_dim;
  for (int l = 0; l < hidden_layers; ++l) {
    m.layers.emplace_back(in, hidden, nn::Activation::Tanh);
    in = hidden;
  }
  m.layers.emplace_back(in, kNumClasses, nn::Activation::Identity);
  return m;
}

}  // namespace

void BlenderConfig::validate() const {
  require(hidden >= 1 && hidden_layers >= 0, Errc::InvalidConfig, "blender needs hidden >= 1, hidden_layers >= 0");
  require(epochs >= 0 && batch_size >= 1, Errc::InvalidConfig, "blender needs epochs >= 0 and batch_size >= 1");
  require(learning_rate > 0, Errc::InvalidConfig, "blender learning_rate must be > 0");
  require(dropout >= 0 && dropout < 1, Errc::InvalidConfig, "blender dropout must lie in [0, 1)");
}

Eigen::Vector4d BlenderModel::predict(const Eigen::VectorXd& input) const {
  require(!layers.empty() && input.size() == input_dim(), Errc::ShapeMismatch,
          fmt::format("blender input has {} values, expected {}", input.size(), input_dim()));
  Eigen::MatrixXd z = scaler.apply(input);
  for (const auto& l : layers) z = l.forward(z);
  return nn::softmax(z.col(0));
}

BlenderTrainResult train_blender(std::span<const Eigen::VectorXd> vectors, std::span<const RhythmClass> labels,
                                 std::span<const std::string> ids, std::span<const std::string> level1_train_ids,
                                 const BlenderConfig& config, bool has_external) {
  config.validate();
  if (vectors.empty()) fail(Errc::EmptyDataset, "no blender training vectors");
  require(labels.size() == vectors.size(), Errc::LengthMismatch, "one label per prediction vector required");
  require(ids.empty() || ids.size() == vectors.size(), Errc::LengthMismatch, "one id per prediction vector required");
  const std::unordered_set<std::string> seen(level1_train_ids.begin(), level1_train_ids.end());
  for (const auto& id : ids) {
    if (seen.count(id)) fail(Errc::LeakageDetected, fmt::format("record '{}' was also used for level-1 training", id));
  }

  const Eigen::Index dim = vectors.front().size();
  const auto n = static_cast<Eigen::Index>(vectors.size());
  Eigen::MatrixXd x(dim, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    require(vectors[static_cast<std::size_t>(i)].size() == dim, Errc::ShapeMismatch,
            "prediction vectors differ in dimension");
    x.col(i) = vectors[static_cast<std::size_t>(i)];
  }
  std::vector<int> y(vectors.size());
  std::array<std::size_t, kNumClasses> counts{};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    y[i] = code(labels[i]);
    ++counts[static_cast<std::size_t>(y[i])];
  }
  const auto weights = nn::class_weights(counts);

  BlenderTrainResult result;
  BlenderModel& model = result.model;
  model = make_blender(dim, config.hidden, config.hidden_layers);
  model.has_external = has_external;
  model.epochs = config.epochs;
  model.dropout = config.dropout;
  const Eigen::MatrixXd one = x;
  model.scaler = FeatureScaler::fit(std::span<const Eigen::MatrixXd>(&one, 1));
  const Eigen::MatrixXd xs = model.scaler.apply(x);

  Rng init(derive_seed(config.seed, "init"));
  for (auto& l : model.layers) l.init(init);
  Rng rng(derive_seed(config.seed, "train"));
  nn::Adam<double> adam(config.learning_rate);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const std::size_t L = model.layers.size();
  std::bernoulli_distribution keep(1.0 - config.dropout);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const auto b = static_cast<Eigen::Index>(stop - start);
      Eigen::MatrixXd batch(dim, b);
      std::vector<int> by(static_cast<std::size_t>(b));
      for (Eigen::Index j = 0; j < b; ++j) {
        batch.col(j) = xs.col(order[start + static_cast<std::size_t>(j)]);
        by[static_cast<std::size_t>(j)] = y[static_cast<std::size_t>(order[start + static_cast<std::size_t>(j)])];
      }
      // Inverted dropout on the inputs of every layer after the first.
      std::vector<Eigen::MatrixXd> ins(L), outs(L), masks(L);
      Eigen::MatrixXd z = batch;
      for (std::size_t l = 0; l < L; ++l) {
        if (l > 0 && config.dropout > 0) {
          masks[l].resize(z.rows(), z.cols());
          for (Eigen::Index k = 0; k < masks[l].size(); ++k) {
            masks[l].data()[k] = keep(rng) ? 1.0 / (1.0 - config.dropout) : 0.0;
          }
          z = z.cwiseProduct(masks[l]);
        }
        ins[l] = z;
        z = model.layers[l].forward(z);
        outs[l] = z;
      }
      const auto lg = nn::weighted_softmax_ce<double>(z, by, weights);
      if (!std::isfinite(lg.loss)) fail(Errc::NonFiniteLoss, fmt::format("blender loss diverged at epoch {}", epoch + 1));
      for (auto& l : model.layers) l.for_each_param([](nn::Param<double>& p) { p.zero_grad(); });
      Eigen::MatrixXd d = lg.gradient;
      for (std::size_t l = L; l-- > 0;) {
        d = model.layers[l].backward(ins[l], outs[l], d);
        if (l > 0 && config.dropout > 0) d = d.cwiseProduct(masks[l]);
      }
      adam.step(model);
      total += lg.loss * static_cast<double>(b);
    }
    result.loss_history.push_back(total / static_cast<double>(n));
  }
  return result;
}

void save_blender(const BlenderModel& model, const std::filesystem::path& path) {
  require(!model.layers.empty(), Errc::InvalidArgument, "cannot save an empty blender");
  const int hidden_layers = static_cast<int>(model.layers.size()) - 1;
  const auto hidden = hidden_layers > 0 ? model.layers.front().out_dim() : 0;
  io::BinaryWriter w;
  w.bytes(std::string_view(kBlenderMagic, 4));
  w.u16(kBlenderVersion);
  w.u16(static_cast<std::uint16_t>(model.input_dim()));
  w.u16(static_cast<std::uint16_t>(hidden));
  w.bytes(std::string(1, static_cast<char>(hidden_layers)));
  w.bytes(std::string(1, static_cast<char>(model.has_external ? 1 : 0)));
  w.u32(static_cast<std::uint32_t>(model.epochs));
  w.f64(model.dropout);
  for (Eigen::Index i = 0; i < model.input_dim(); ++i) w.f64(model.scaler.mean[i]);
  for (Eigen::Index i = 0; i < model.input_dim(); ++i) w.f64(model.scaler.scale[i]);
  model.for_each_param([&](const nn::Param<double>& p) { nn::write_row_major(w, p.value); });
  io::write_atomic(path, w.data());
}

BlenderModel load_blender(const std::filesystem::path& path) {
  io::BinaryReader r(io::read_file(path));
  if (r.bytes(4) != std::string_view(kBlenderMagic, 4)) {
    fail(Errc::InvalidModelFile, fmt::format("{}: not a blender file", path.string()));
  }
  if (r.u16() != kBlenderVersion) fail(Errc::InvalidModelFile, fmt::format("{}: unsupported version", path.string()));
  const int input_dim = r.u16();
  const int hidden = r.u16();
  const int hidden_layers = static_cast<unsigned char>(r.bytes(1)[0]);
  const int external = static_cast<unsigned char>(r.bytes(1)[0]);
  const auto epochs = r.u32();
  if (input_dim < 1 || external > 1 || (hidden_layers > 0 && hidden < 1)) {
    fail(Errc::InvalidModelFile, fmt::format("{}: corrupt header", path.string()));
  }
  BlenderModel m = make_blender(input_dim, std::max(hidden, 1), hidden_layers);
  m.has_external = external == 1;
  m.epochs = static_cast<int>(epochs);
  m.dropout = r.f64();
  m.scaler.mean.resize(input_dim);
  m.scaler.scale.resize(input_dim);
  for (int i = 0; i < input_dim; ++i) m.scaler.mean[i] = r.f64();
  for (int i = 0; i < input_dim; ++i) m.scaler.scale[i] = r.f64();
  m.for_each_param([&](nn::Param<double>& p) {
    nn::read_row_major(r, p.value);
    p.zero_grad();
  });
  if (r.remaining() != 0) fail(Errc::InvalidModelFile, fmt::format("{}: trailing bytes", path.string()));
  return m;
}

}  // namespace beatnet

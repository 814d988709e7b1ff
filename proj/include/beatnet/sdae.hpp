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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "beatnet/nn/dense.hpp"

namespace beatnet {

struct SdaeConfig {
  int hidden = 64;
  int code = 16;
  double corruption_rate = 0.25;
  int pretrain_epochs = 10;  // per greedy layer
  int finetune_epochs = 20;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t max_inputs = 0;  // random subset cap, 0 = use all
  std::uint64_t seed = 0;

  void validate() const;
};

// Stacked denoising autoencoder: input -> hidden -> code (tanh) and the
// mirrored decoder code -> hidden (tanh) -> input (linear).
class SdaeModel {
 public:
  nn::DenseLayer<double> encoder1, encoder2, decoder2, decoder1;
  double corruption_rate = 0.25;
  std::string trained_on;  // "beats" or "coeffs"

  SdaeModel() = default;
  SdaeModel(Eigen::Index input_dim, Eigen::Index hidden, Eigen::Index code);

  Eigen::Index input_dim() const noexcept { return encoder1.in_dim(); }
  Eigen::Index hidden_dim() const noexcept { return encoder1.out_dim(); }
  Eigen::Index code_dim() const noexcept { return encoder2.out_dim(); }

  // Columns are samples. No corruption is applied.
  Eigen::MatrixXd encode_batch(const Eigen::MatrixXd& inputs) const;
  Eigen::MatrixXd reconstruct_batch(const Eigen::MatrixXd& inputs) const;

  template <typename Fn>
  void for_each_param(Fn&& fn) {
    encoder1.for_each_param(fn);
    encoder2.for_each_param(fn);
    decoder2.for_each_param(fn);
    decoder1.for_each_param(fn);
  }
  template <typename Fn>
  void for_each_param(Fn&& fn) const {
    encoder1.for_each_param(fn);
    encoder2.for_each_param(fn);
    decoder2.for_each_param(fn);
    decoder1.for_each_param(fn);
  }
};

struct SdaeTrainResult {
  SdaeModel model;
  std::vector<double> layer1_history;    // input-space MSE per greedy epoch
  std::vector<double> layer2_history;    // hidden-space MSE per greedy epoch
  std::vector<double> finetune_history;  // input-space MSE per joint epoch
  double final_mse = 0.0;                // clean-input reconstruction MSE after training

  // Input-space curve: greedy layer-1 epochs followed by joint epochs.
  std::vector<double> loss_history() const;
};

// Greedy layer-wise pretraining then joint fine-tuning. Each input element is
// zeroed with probability corruption_rate; the loss is the MSE against the
// uncorrupted input.
SdaeTrainResult train_sdae(std::span<const Eigen::VectorXd> inputs, const SdaeConfig& config,
                           std::string trained_on);

Eigen::VectorXd encode(const SdaeModel& model, const Eigen::VectorXd& input);
double reconstruction_mse(const SdaeModel& model, std::span<const Eigen::VectorXd> inputs);

// "SDAE" file: 16-byte header magic[4] | u32 version | u32 input_dim |
// u16 hidden | u16 code, then encoder1, encoder2, decoder2, decoder1
// (weight then bias, row-major float64).
void save_sdae(const SdaeModel& model, const std::filesystem::path& path);
SdaeModel load_sdae(const std::filesystem::path& path);

}  // namespace beatnet

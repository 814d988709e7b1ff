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

#include <filesystem>
#include <string>
#include <vector>

#include "beatnet/io_util.hpp"
#include "beatnet/nn/model.hpp"

namespace beatnet::nn {

// "SQMD" file: 16-byte little-endian header
//   magic[4] | u16 version | u16 input_dim | u16 hidden | u8 recurrent_layers |
//   u8 forward_layers | u8 attention | u8 n_classes | u16 reserved
// followed by every parameter, row-major float64, in for_each_param order.
inline constexpr std::uint16_t kModelFileVersion = 1;

std::string serialize_model(const SequenceModel<double>& model);
SequenceModel<double> deserialize_model(const std::string& bytes);

void save_model(const SequenceModel<double>& model, const std::filesystem::path& path);
SequenceModel<double> load_model(const std::filesystem::path& path);

void save_loss_history(const std::vector<double>& history, const std::filesystem::path& path);

// Shared helpers for the header + row-major float64 formats.
void write_row_major(io::BinaryWriter& out, const Eigen::MatrixXd& m);
// Fills `m` (already sized) from the stream.
void read_row_major(io::BinaryReader& in, Eigen::MatrixXd& m);

}  // namespace beatnet::nn

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

#include "beatnet/nn/model_io.hpp"

#include <fmt/format.h>

namespace beatnet::nn {

void write_row_major(io::BinaryWriter& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.f64(m(i, j));
  }
}

void read_row_major(io::BinaryReader& in, Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(i, j) = in.f64();
      require(std::isfinite(m(i, j)), Errc::InvalidModelFile, "non-finite parameter");
    }
  }
}

std::string serialize_model(const SequenceModel<double>& model) {
  const auto& s = model.shape;
  require(s.input_dim < 65536 && s.hidden < 65536 && s.recurrent_layers < 256 && s.n_classes < 256,
          Errc::InvalidArgument, "model too large for the SQMD header");
  io::BinaryWriter out;
  out.bytes("SQMD");
  out.u16(kModelFileVersion);
  out.u16(static_cast<std::uint16_t>(s.input_dim));
  out.u16(static_cast<std::uint16_t>(s.hidden));
  out.bytes(std::string{static_cast<char>(s.recurrent_layers), static_cast<char>(s.forward_layers),
                        static_cast<char>(s.attention ? 1 : 0), static_cast<char>(s.n_classes)});
  out.u16(0);
  model.for_each_param([&](const Param<double>& p) { write_row_major(out, p.value); });
  return out.data();
}

SequenceModel<double> deserialize_model(const std::string& bytes) {
  io::BinaryReader in(bytes);
  if (in.remaining() < 16 || in.bytes(4) != "SQMD") fail(Errc::InvalidModelFile, "missing SQMD magic");
  const auto version = in.u16();
  require(version == kModelFileVersion, Errc::InvalidModelFile, fmt::format("unsupported version {}", version));
  ModelShape shape;
  shape.input_dim = in.u16();
  shape.hidden = in.u16();
  const std::string b = in.bytes(4);
  shape.recurrent_layers = static_cast<unsigned char>(b[0]);
  shape.forward_layers = static_cast<unsigned char>(b[1]);
  shape.attention = b[2] != 0;
  shape.n_classes = static_cast<unsigned char>(b[3]);
  in.u16();
  require(shape.input_dim >= 1 && shape.hidden >= 1 && shape.recurrent_layers >= 1 &&
              (shape.forward_layers == 1 || shape.forward_layers == 2) && shape.n_classes >= 2,
          Errc::InvalidModelFile, "invalid model shape");
  SequenceModel<double> model(shape);
  model.for_each_param([&](Param<double>& p) { read_row_major(in, p.value); });
  require(in.remaining() == 0, Errc::InvalidModelFile, "trailing bytes after parameters");
  return model;
}

void save_model(const SequenceModel<double>& model, const std::filesystem::path& path) {
  io::write_atomic(path, serialize_model(model));
}

SequenceModel<double> load_model(const std::filesystem::path& path) {
  return deserialize_model(io::read_file(path));
}

void save_loss_history(const std::vector<double>& history, const std::filesystem::path& path) {
  std::string out = "epoch,mean_loss\n";
  for (std::size_t i = 0; i < history.size(); ++i) out += fmt::format("{},{}\n", i + 1, history[i]);
  io::write_atomic(path, out);
}

}  // namespace beatnet::nn

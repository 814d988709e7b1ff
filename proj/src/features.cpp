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

#include "beatnet/features.hpp"

#include <fmt/format.h>

#include <cmath>

#include "beatnet/errors.hpp"
#include "beatnet/wavelets.hpp"

namespace beatnet {

Eigen::VectorXd BeatFeatureVector::to_vector() const {
  require(beat_embed.size() == kEmbeddingDim && coeff_embed.size() == kEmbeddingDim, Errc::DimensionMismatch,
          "embeddings must have 16 entries");
  Eigen::VectorXd v(kBeatFeatureDim);
  Eigen::Index i = 0;
  v[i++] = delta_rr;
  for (double r : rwe) v[i++] = r;
  v[i++] = twe;
  v[i++] = r_amp;
  v[i++] = q_amp;
  v[i++] = qrs_dur;
  v[i++] = we;
  v.segment(i, kEmbeddingDim) = beat_embed;
  i += kEmbeddingDim;
  v.segment(i, kEmbeddingDim) = coeff_embed;
  return v;
}

std::vector<std::string> beat_feature_names() {
  std::vector<std::string> names{"delta_rr"};
  for (int b = 1; b <= 5; ++b) names.push_back(fmt::format("rwe{}", b));
  for (const char* n : {"twe", "r_amp", "q_amp", "qrs_dur", "we"}) names.emplace_back(n);
  for (int k = 0; k < kEmbeddingDim; ++k) names.push_back(fmt::format("beat_embed{}", k));
  for (int k = 0; k < kEmbeddingDim; ++k) names.push_back(fmt::format("coeff_embed{}", k));
  return names;
}

Eigen::MatrixXd to_matrix(const std::vector<BeatFeatureVector>& features) {
  Eigen::MatrixXd out(kBeatFeatureDim, static_cast<Eigen::Index>(features.size()));
  for (std::size_t t = 0; t < features.size(); ++t) out.col(static_cast<Eigen::Index>(t)) = features[t].to_vector();
  return out;
}

Morphology beat_morphology(const Eigen::Ref<const Eigen::VectorXd>& window, double fs) {
  const auto half = static_cast<Eigen::Index>(std::floor(0.08 * fs + 1e-9));
  if (half < 1 || window.size() < 2 * half + 1) {
    fail(Errc::WindowTooShort, fmt::format("window of {} samples cannot hold a +/-{} sample QRS search",
                                           window.size(), half));
  }
  const Eigen::Index c = window.size() / 2;
  // Q: scan from the far edge towards R, keeping the first minimum.
  Eigen::Index q = c - half;
  for (Eigen::Index i = c - half + 1; i <= c - 1; ++i) {
    if (window[i] < window[q]) q = i;
  }
  // S: scan from the far edge back towards R.
  Eigen::Index s = c + half;
  for (Eigen::Index i = c + half - 1; i >= c + 1; --i) {
    if (window[i] < window[s]) s = i;
  }
  Morphology m;
  m.r_amp = window[c];
  m.q_amp = window[q];
  m.qrs_dur = static_cast<double>(s - q) / fs;
  return m;
}

std::vector<Eigen::VectorXd> beat_inputs(const BeatSequence& beats) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(beats.size()));
  for (Eigen::Index t = 0; t < beats.size(); ++t) out.emplace_back(beats.windows.row(t).transpose());
  return out;
}

std::vector<Eigen::VectorXd> coefficient_inputs(const BeatSequence& beats) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(beats.size()));
  for (Eigen::Index t = 0; t < beats.size(); ++t) {
    out.push_back(dwt(Eigen::VectorXd(beats.windows.row(t).transpose())).flatten());
  }
  return out;
}

std::vector<BeatFeatureVector> extract_features(const BeatSequence& beats, const SdaeModel& sdae_beat,
                                                const SdaeModel& sdae_coeff) {
  if (beats.size() == 0) fail(Errc::NoBeats, "no beats to featurize");
  const Eigen::Index steps = beats.size();
  require(sdae_beat.input_dim() == beats.width(), Errc::DimensionMismatch,
          fmt::format("beat SDAE expects {} samples, windows have {}", sdae_beat.input_dim(), beats.width()));
  require(sdae_beat.code_dim() == kEmbeddingDim && sdae_coeff.code_dim() == kEmbeddingDim, Errc::DimensionMismatch,
          "SDAE code width must be 16");

  Eigen::MatrixXd coeffs;
  std::vector<BeatFeatureVector> out(static_cast<std::size_t>(steps));
  for (Eigen::Index t = 0; t < steps; ++t) {
    const Eigen::VectorXd window = beats.windows.row(t).transpose();
    const auto decomp = dwt(window);
    const auto energies = wavelet_energies(decomp);
    const Eigen::VectorXd flat = decomp.flatten();
    if (t == 0) {
      require(sdae_coeff.input_dim() == flat.size(), Errc::DimensionMismatch,
              fmt::format("coefficient SDAE expects {} inputs, got {}", sdae_coeff.input_dim(), flat.size()));
      coeffs.resize(flat.size(), steps);
    }
    coeffs.col(t) = flat;

    auto& f = out[static_cast<std::size_t>(t)];
    f.delta_rr = beats.delta_rr[t];
    for (int b = 0; b < 5; ++b) f.rwe[static_cast<std::size_t>(b)] = energies.rwe[b];
    f.twe = energies.twe;
    f.we = energies.we;
    const auto m = beat_morphology(window, beats.fs);
    f.r_amp = m.r_amp;
    f.q_amp = m.q_amp;
    f.qrs_dur = m.qrs_dur;
  }
  const Eigen::MatrixXd beat_codes = sdae_beat.encode_batch(beats.windows.transpose());
  const Eigen::MatrixXd coeff_codes = sdae_coeff.encode_batch(coeffs);
  for (Eigen::Index t = 0; t < steps; ++t) {
    out[static_cast<std::size_t>(t)].beat_embed = beat_codes.col(t);
    out[static_cast<std::size_t>(t)].coeff_embed = coeff_codes.col(t);
  }
  return out;
}

Eigen::VectorXd RecordFeatures::to_vector() const {
  Eigen::VectorXd v(kDim);
  for (int b = 0; b < 5; ++b) v[b] = rwe_whole[static_cast<std::size_t>(b)];
  v[5] = we_whole;
  v[6] = aad_we;
  v[7] = aad_delta_rr;
  return v;
}

double absolute_average_deviation(const Eigen::Ref<const Eigen::VectorXd>& x) {
  require(x.size() >= 1, Errc::NoBeats, "AAD of an empty series");
  // Centred on x[0] first so a constant series gives exactly zero.
  const Eigen::ArrayXd y = x.array() - x[0];
  return (y - y.mean()).abs().mean();
}

RecordFeatures record_features(const EcgRecord& record, const BeatSequence& beats,
                               const Eigen::Ref<const Eigen::VectorXd>& per_beat_we) {
  if (beats.size() == 0) fail(Errc::NoBeats, "record features need at least one beat");
  require(per_beat_we.size() == beats.size(), Errc::ShapeMismatch, "one WE value per beat required");
  const auto energies = wavelet_energies(dwt(record.samples));
  RecordFeatures r;
  for (int b = 0; b < 5; ++b) r.rwe_whole[static_cast<std::size_t>(b)] = energies.rwe[b];
  r.we_whole = energies.we;
  r.aad_we = absolute_average_deviation(per_beat_we);
  r.aad_delta_rr = absolute_average_deviation(beats.delta_rr);
  return r;
}

Eigen::VectorXd per_beat_we(const std::vector<BeatFeatureVector>& features) {
  Eigen::VectorXd we(static_cast<Eigen::Index>(features.size()));
  for (std::size_t t = 0; t < features.size(); ++t) we[static_cast<Eigen::Index>(t)] = features[t].we;
  return we;
}

}  // namespace beatnet

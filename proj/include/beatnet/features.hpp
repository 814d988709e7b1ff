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

#include <array>
#include <string>
#include <vector>

#include "beatnet/sdae.hpp"
#include "beatnet/segmentation.hpp"
#include "beatnet/signal_io.hpp"

namespace beatnet {

inline constexpr int kEmbeddingDim = 16;
// delta_rr, rwe[5], twe, r_amp, q_amp, qrs_dur, we, beat_embed[16], coeff_embed[16]
inline constexpr int kBeatFeatureDim = 1 + 5 + 1 + 1 + 1 + 1 + 1 + 2 * kEmbeddingDim;

struct BeatFeatureVector {
  double delta_rr = 0;
  std::array<double, 5> rwe{};
  double twe = 0;
  double r_amp = 0;
  double q_amp = 0;
  double qrs_dur = 0;
  double we = 0;
  Eigen::VectorXd beat_embed;
  Eigen::VectorXd coeff_embed;

  Eigen::VectorXd to_vector() const;
};

std::vector<std::string> beat_feature_names();

// kBeatFeatureDim x T, one column per beat.
Eigen::MatrixXd to_matrix(const std::vector<BeatFeatureVector>& features);

struct Morphology {
  double r_amp = 0;
  double q_amp = 0;
  double qrs_dur = 0;  // seconds
};

// R at the window centre; Q and S are the minima within 80 ms before and
// after it. Ties resolve to the sample farthest from R.
Morphology beat_morphology(const Eigen::Ref<const Eigen::VectorXd>& window, double fs);

// Per-beat SDAE training inputs.
std::vector<Eigen::VectorXd> beat_inputs(const BeatSequence& beats);
std::vector<Eigen::VectorXd> coefficient_inputs(const BeatSequence& beats);

std::vector<BeatFeatureVector> extract_features(const BeatSequence& beats, const SdaeModel& sdae_beat,
                                                const SdaeModel& sdae_coeff);

struct RecordFeatures {
  std::array<double, 5> rwe_whole{};
  double we_whole = 0;
  double aad_we = 0;
  double aad_delta_rr = 0;

  static constexpr int kDim = 8;
  Eigen::VectorXd to_vector() const;
};

// Absolute average deviation: mean |x_i - mean(x)|.
double absolute_average_deviation(const Eigen::Ref<const Eigen::VectorXd>& x);

RecordFeatures record_features(const EcgRecord& record, const BeatSequence& beats,
                               const Eigen::Ref<const Eigen::VectorXd>& per_beat_we);

Eigen::VectorXd per_beat_we(const std::vector<BeatFeatureVector>& features);

}  // namespace beatnet

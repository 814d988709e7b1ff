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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "beatnet/features.hpp"
#include "beatnet/nn/model.hpp"
#include "beatnet/nn/train.hpp"
#include "beatnet/sdae.hpp"
#include "beatnet/segmentation.hpp"
#include "beatnet/signal_io.hpp"

namespace beatnet {

// ---------------------------------------------------------------------------
// Level-1 ensemble

struct EnsembleMember {
  std::string id;
  std::vector<RhythmClass> targets;  // positive class set of the binary task
  nn::TrainConfig config;            // config.attention selects the attention variant
};

struct EnsembleSpec {
  std::vector<EnsembleMember> members;
  void validate() const;
};

// Four one-vs-rest members without attention followed by the same four with
// attention. Member i trains with seed derive_seed(seed, "member:<i>").
EnsembleSpec default_ensemble_spec(const nn::TrainConfig& base, std::uint64_t seed);

// 1 when `label` belongs to the member's target set.
int binary_label(const EnsembleMember& member, RhythmClass label);

// Per-feature standardisation fitted on the training beats.
struct FeatureScaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static FeatureScaler fit(std::span<const Eigen::MatrixXd> sequences);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& features) const;
};

struct Featurizer {
  DetectorConfig detector;
  SdaeModel sdae_beat;
  SdaeModel sdae_coeff;
};

// Normalised record and its beat segmentation. Throws ZeroVariance,
// RecordTooShort or NoBeats.
struct Segmented {
  EcgRecord normalized;
  BeatSequence beats;
};
Segmented segment_record(const EcgRecord& record, const DetectorConfig& detector);

struct PreparedRecord {
  std::string id;
  std::optional<RhythmClass> label;
  BeatSequence beats;
  Eigen::MatrixXd features;  // kBeatFeatureDim x T, unscaled
  RecordFeatures record_feats;
};

PreparedRecord prepare_record(const Segmented& segmented, const Featurizer& featurizer,
                              std::optional<RhythmClass> label = std::nullopt);

struct Ensemble {
  EnsembleSpec spec;
  FeatureScaler scaler;
  std::vector<nn::SequenceModel<double>> models;
  std::vector<std::vector<double>> loss_histories;
  std::vector<std::string> train_ids;
  // Most prevalent training class outside each member's target set.
  std::vector<RhythmClass> negative_class;
};

// Trains every member on its binary relabelling of `train`, with class
// weights recomputed for the binary split. Members run on up to `threads`
// workers (0 = hardware concurrency); results do not depend on scheduling.
Ensemble train_ensemble(std::span<const PreparedRecord> train, const EnsembleSpec& spec, unsigned threads = 0);

struct MemberOutput {
  Eigen::Vector2d probs;     // [P(negative), P(positive)]
  Eigen::VectorXd attention; // empty for members without attention
};

std::vector<MemberOutput> run_members(const Ensemble& ensemble, const Eigen::MatrixXd& features);

// A member used on its own as a 4-way classifier: positive -> first target
// class, negative -> the member's negative_class.
RhythmClass member_decision(const Ensemble& ensemble, std::size_t member, const MemberOutput& out);

struct PredictionVector {
  std::vector<double> level1_scores;                    // 2 per member, spec order
  std::optional<std::array<double, 4>> external_scores; // caller-normalised slots
  RecordFeatures record_feats;

  static Eigen::Index dimension_for(std::size_t members, bool external) {
    return static_cast<Eigen::Index>(2 * members) + (external ? 4 : 0) + RecordFeatures::kDim;
  }
  Eigen::Index dimension() const { return static_cast<Eigen::Index>(level1_scores.size()) + (external_scores ? 4 : 0) + RecordFeatures::kDim; }
  // Level-1 scores, then external slots (zero-filled when absent), then record
  // features. `with_external_slots` forces the 4 slots to be present.
  Eigen::VectorXd to_vector(bool with_external_slots) const;
};

PredictionVector assemble(std::span<const MemberOutput> outputs, const RecordFeatures& record_feats,
                          const std::optional<std::array<double, 4>>& external = std::nullopt);
PredictionVector assemble(const Ensemble& ensemble, const Eigen::MatrixXd& features,
                          const RecordFeatures& record_feats,
                          const std::optional<std::array<double, 4>>& external = std::nullopt);

// CSV row: record_id,members,has_external,<values...>
std::string format_prediction_vector(const std::string& record_id, const PredictionVector& pv);
std::pair<std::string, PredictionVector> parse_prediction_vector(std::string_view line);

// ---------------------------------------------------------------------------
// Level-2 blender

struct BlenderConfig {
  int hidden = 32;
  int hidden_layers = 1;
  int epochs = 300;
  double learning_rate = 3e-3;
  double dropout = 0.0;
  int batch_size = 16;
  std::uint64_t seed = 0;

  void validate() const;
};

class BlenderModel {
 public:
  FeatureScaler scaler;
  std::vector<nn::DenseLayer<double>> layers;  // tanh hidden layers + linear 4-way head
  bool has_external = false;
  int epochs = 0;
  double dropout = 0.0;

  Eigen::Index input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  // Probabilities on the 4-simplex.
  Eigen::Vector4d predict(const Eigen::VectorXd& input) const;

  template <typename Fn>
  void for_each_param(Fn&& fn) {
    for (auto& l : layers) l.for_each_param(fn);
  }
  template <typename Fn>
  void for_each_param(Fn&& fn) const {
    for (const auto& l : layers) l.for_each_param(fn);
  }
};

struct BlenderTrainResult {
  BlenderModel model;
  std::vector<double> loss_history;
};

// Trains on held-out (validation) prediction vectors. Throws LeakageDetected
// when any id also appears in `level1_train_ids`.
BlenderTrainResult train_blender(std::span<const Eigen::VectorXd> vectors, std::span<const RhythmClass> labels,
                                 std::span<const std::string> ids, std::span<const std::string> level1_train_ids,
                                 const BlenderConfig& config, bool has_external = false);

// "BLND" file: magic[4] | u16 version | u16 input_dim | u16 hidden |
// u8 hidden_layers | u8 has_external | u32 epochs, then f64 dropout, scaler
// mean, scaler scale and every layer (weight, bias) as row-major float64.
void save_blender(const BlenderModel& model, const std::filesystem::path& path);
BlenderModel load_blender(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// End-to-end prediction and scoring

struct Pipeline {
  Featurizer featurizer;
  Ensemble ensemble;
  BlenderModel blender;
};

struct AttentionTrace {
  std::string member_id;
  std::vector<Eigen::Index> r_indices;
  Eigen::VectorXd weights;  // a_t aligned with r_indices
  double confidence = 0.0;  // member's positive-class probability
};

struct Prediction {
  std::string record_id;
  std::array<double, 4> scores{};
  RhythmClass label = RhythmClass::Noisy;
  bool fallback = false;  // segmentation failed; reported as Noisy with score 1
  std::string fallback_reason;
  std::vector<AttentionTrace> attention;
  std::vector<double> level1_scores;
};

Prediction predict(const EcgRecord& record, const Pipeline& pipeline,
                   const std::optional<std::array<double, 4>>& external = std::nullopt);

struct F1Report {
  std::array<double, 4> per_class{};
  double average = 0.0;  // mean over Normal, AF, Other
};

F1Report evaluate_f1(std::span<const RhythmClass> predictions, std::span<const RhythmClass> truth);

}  // namespace beatnet

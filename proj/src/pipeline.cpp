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

#include "beatnet/pipeline.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <set>
#include <thread>

#include "beatnet/errors.hpp"
#include "beatnet/io_util.hpp"
#include "beatnet/random.hpp"

namespace beatnet {

void EnsembleSpec::validate() const {
  require(!members.empty(), Errc::InvalidConfig, "ensemble needs at least one member");
  std::set<std::string> ids;
  for (const auto& m : members) {
    require(!m.id.empty(), Errc::InvalidConfig, "ensemble member without id");
    require(ids.insert(m.id).second, Errc::InvalidConfig, fmt::format("duplicate member id '{}'", m.id));
    std::set<RhythmClass> t(m.targets.begin(), m.targets.end());
    require(!t.empty() && t.size() == m.targets.size() && t.size() < static_cast<std::size_t>(kNumClasses),
            Errc::InvalidConfig,
            fmt::format("member '{}' needs a nonempty proper subset of distinct target classes", m.id));
    m.config.validate();
  }
}

EnsembleSpec default_ensemble_spec(const nn::TrainConfig& base, std::uint64_t seed) {
  EnsembleSpec spec;
  for (int variant = 0; variant < 2; ++variant) {
    for (int c = 0; c < kNumClasses; ++c) {
      const auto cls = rhythm_from_code(c);
      EnsembleMember m;
      m.id = fmt::format("{}-vs-rest{}", to_string(cls), variant == 1 ? "-att" : "");
      m.targets = {cls};
      m.config = base;
      m.config.attention = variant == 1;
      m.config.seed = derive_seed(seed, fmt::format("member:{}", spec.members.size()));
      spec.members.push_back(std::move(m));
    }
  }
  return spec;
}

int binary_label(const EnsembleMember& member, RhythmClass label) {
  return std::find(member.targets.begin(), member.targets.end(), label) != member.targets.end() ? 1 : 0;
}

FeatureScaler FeatureScaler::fit(std::span<const Eigen::MatrixXd> sequences) {
  require(!sequences.empty(), Errc::EmptyDataset, "scaler needs at least one sequence");
  const Eigen::Index k = sequences.front().rows();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(k);
  double n = 0;
  for (const auto& s : sequences) {
    require(s.rows() == k, Errc::ShapeMismatch, "inconsistent feature dimension");
    sum += s.rowwise().sum();
    n += static_cast<double>(s.cols());
  }
  require(n > 0, Errc::EmptyDataset, "scaler needs at least one column");
  FeatureScaler out;
  out.mean = sum / n;
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(k);
  for (const auto& s : sequences) sq += (s.colwise() - out.mean).array().square().matrix().rowwise().sum();
  out.scale = (sq / n).array().sqrt().matrix();
  // Constant features pass through centred but unscaled.
  for (Eigen::Index i = 0; i < k; ++i) {
    if (out.scale[i] < 1e-12) out.scale[i] = 1.0;
  }
  return out;
}

Eigen::MatrixXd FeatureScaler::apply(const Eigen::MatrixXd& features) const {
  require(features.rows() == mean.size(), Errc::ShapeMismatch,
          fmt::format("features have {} rows, scaler expects {}", features.rows(), mean.size()));
  return ((features.colwise() - mean).array().colwise() / scale.array()).matrix();
}

Segmented segment_record(const EcgRecord& record, const DetectorConfig& detector) {
  Segmented out;
  out.normalized = normalize(record);
  const auto peaks = detect_r_peaks(out.normalized, detector);
  out.beats = segment_beats(out.normalized, peaks);
  return out;
}

PreparedRecord prepare_record(const Segmented& segmented, const Featurizer& featurizer,
                              std::optional<RhythmClass> label) {
  PreparedRecord out;
  out.id = segmented.normalized.id;
  out.label = label ? label : segmented.normalized.label;
  out.beats = segmented.beats;
  const auto feats = extract_features(segmented.beats, featurizer.sdae_beat, featurizer.sdae_coeff);
  out.features = to_matrix(feats);
  out.record_feats = record_features(segmented.normalized, segmented.beats, per_beat_we(feats));
  return out;
}

namespace {

// Runs job(i) for i in [0, n) on up to `threads` workers. The first failure
// by index is rethrown so errors do not depend on scheduling.
template <typename Job>
void parallel_for(std::size_t n, unsigned threads, Job&& job) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

Ensemble train_ensemble(std::span<const PreparedRecord> train, const EnsembleSpec& spec, unsigned threads) {
  spec.validate();
  if (train.empty()) fail(Errc::EmptyDataset, "no level-1 training records");

  std::vector<Eigen::MatrixXd> raw;
  std::array<std::size_t, kNumClasses> class_counts{};
  raw.reserve(train.size());
  for (const auto& r : train) {
    require(r.label.has_value(), Errc::InvalidArgument, fmt::format("training record '{}' has no label", r.id));
    raw.push_back(r.features);
    ++class_counts[static_cast<std::size_t>(code(*r.label))];
  }

  Ensemble ens;
  ens.spec = spec;
  ens.scaler = FeatureScaler::fit(raw);
  std::vector<Eigen::MatrixXd> scaled;
  scaled.reserve(raw.size());
  for (const auto& m : raw) scaled.push_back(ens.scaler.apply(m));
  for (const auto& r : train) ens.train_ids.push_back(r.id);

  // Relabel and weight up front so that EmptyClass surfaces before any work.
  const std::size_t M = spec.members.size();
  std::vector<std::vector<nn::SequenceSample>> data(M);
  std::vector<std::vector<double>> weights(M);
  for (std::size_t i = 0; i < M; ++i) {
    const auto& member = spec.members[i];
    std::array<std::size_t, 2> counts{};
    for (std::size_t j = 0; j < train.size(); ++j) {
      const int y = binary_label(member, *train[j].label);
      ++counts[static_cast<std::size_t>(y)];
      data[i].push_back({scaled[j], y});
    }
    try {
      weights[i] = nn::class_weights(counts);
    } catch (const Error& e) {
      fail(Errc::EmptyClass, fmt::format("member '{}': {} side of the binary split is empty", member.id,
                                         counts[0] == 0 ? "negative" : "positive"));
    }
    // Most frequent class outside the target set, lowest code on ties.
    RhythmClass neg = RhythmClass::Noisy;
    std::size_t best = 0;
    bool found = false;
    for (int c = 0; c < kNumClasses; ++c) {
      const auto cls = rhythm_from_code(c);
      if (binary_label(member, cls) == 1) continue;
      if (!found || class_counts[static_cast<std::size_t>(c)] > best) {
        neg = cls;
        best = class_counts[static_cast<std::size_t>(c)];
        found = true;
      }
    }
    ens.negative_class.push_back(neg);
  }

  ens.models.resize(M);
  ens.loss_histories.resize(M);
  parallel_for(M, threads, [&](std::size_t i) {
    const auto& cfg = spec.members[i].config;
    auto model = nn::build_model(cfg, kBeatFeatureDim, 2);
    auto result = nn::train(model, data[i], cfg, weights[i]);
    ens.models[i] = std::move(model);
    ens.loss_histories[i] = std::move(result.loss_history);
  });
  return ens;
}

std::vector<MemberOutput> run_members(const Ensemble& ensemble, const Eigen::MatrixXd& features) {
  const Eigen::MatrixXd x = ensemble.scaler.apply(features);
  std::vector<MemberOutput> out;
  out.reserve(ensemble.models.size());
  for (const auto& model : ensemble.models) {
    const auto y = model.forward(x);
    require(y.probs.size() == 2, Errc::ShapeMismatch, "level-1 members must be binary");
    out.push_back({y.probs, y.attention});
  }
  return out;
}

RhythmClass member_decision(const Ensemble& ensemble, std::size_t member, const MemberOutput& out) {
  require(member < ensemble.spec.members.size(), Errc::InvalidArgument, "member index out of range");
  return out.probs[1] > out.probs[0] ? ensemble.spec.members[member].targets.front()
                                     : ensemble.negative_class[member];
}

Eigen::VectorXd PredictionVector::to_vector(bool with_external_slots) const {
  require(with_external_slots || !external_scores, Errc::ShapeMismatch,
          "external scores given but the layout has no external slots");
  const auto n = static_cast<Eigen::Index>(level1_scores.size());
  Eigen::VectorXd v(n + (with_external_slots ? 4 : 0) + RecordFeatures::kDim);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = level1_scores[static_cast<std::size_t>(i)];
  Eigen::Index at = n;
  if (with_external_slots) {
    for (int k = 0; k < 4; ++k) v[at++] = external_scores ? (*external_scores)[static_cast<std::size_t>(k)] : 0.0;
  }
  v.tail(RecordFeatures::kDim) = record_feats.to_vector();
  return v;
}

PredictionVector assemble(std::span<const MemberOutput> outputs, const RecordFeatures& record_feats,
                          const std::optional<std::array<double, 4>>& external) {
  PredictionVector pv;
  for (const auto& o : outputs) {
    require(o.probs.size() == 2, Errc::ShapeMismatch, "each member contributes exactly 2 scores");
    pv.level1_scores.push_back(o.probs[0]);
    pv.level1_scores.push_back(o.probs[1]);
  }
  if (external) {
    for (double s : *external) require(std::isfinite(s), Errc::InvalidArgument, "external scores must be finite");
  }
  pv.external_scores = external;
  pv.record_feats = record_feats;
  return pv;
}

PredictionVector assemble(const Ensemble& ensemble, const Eigen::MatrixXd& features,
                          const RecordFeatures& record_feats, const std::optional<std::array<double, 4>>& external) {
  const auto outputs = run_members(ensemble, features);
  return assemble(outputs, record_feats, external);
}

std::string format_prediction_vector(const std::string& record_id, const PredictionVector& pv) {
  require(record_id.find_first_of(",\n\r") == std::string::npos, Errc::InvalidArgument,
          fmt::format("record id '{}' cannot be written to CSV", record_id));
  require(pv.level1_scores.size() % 2 == 0, Errc::ShapeMismatch, "odd number of level-1 scores");
  std::string line = fmt::format("{},{},{}", record_id, pv.level1_scores.size() / 2, pv.external_scores ? 1 : 0);
  const Eigen::VectorXd v = pv.to_vector(pv.external_scores.has_value());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    line += ',';
    line += io::format_double(v[i]);
  }
  return line;
}

std::pair<std::string, PredictionVector> parse_prediction_vector(std::string_view line) {
  const auto fields = io::split(io::trim(line), ',');
  if (fields.size() < 3) fail(Errc::ParseError, "prediction vector row has fewer than 3 fields");
  const auto members = io::parse_int(fields[1]);
  const auto flag = io::parse_int(fields[2]);
  if (!members || *members < 0 || !flag || (*flag != 0 && *flag != 1)) {
    fail(Errc::ParseError, "bad member count or external flag in prediction vector row");
  }
  const bool external = *flag == 1;
  const auto m = static_cast<std::size_t>(*members);
  const auto expected = static_cast<std::size_t>(PredictionVector::dimension_for(m, external));
  if (fields.size() != 3 + expected) {
    fail(Errc::ParseError, fmt::format("prediction vector row has {} values, expected {}", fields.size() - 3, expected));
  }
  std::vector<double> values;
  for (std::size_t i = 3; i < fields.size(); ++i) {
    const auto v = io::parse_double(fields[i]);
    if (!v) fail(Errc::ParseError, fmt::format("bad number '{}' in prediction vector row", fields[i]));
    values.push_back(*v);
  }
  PredictionVector pv;
  std::size_t at = 0;
  for (; at < 2 * m; ++at) pv.level1_scores.push_back(values[at]);
  if (external) {
    std::array<double, 4> ext{};
    for (auto& e : ext) e = values[at++];
    pv.external_scores = ext;
  }
  auto& rf = pv.record_feats;
  for (auto& r : rf.rwe_whole) r = values[at++];
  rf.we_whole = values[at++];
  rf.aad_we = values[at++];
  rf.aad_delta_rr = values[at++];
  return {std::string(fields[0]), std::move(pv)};
}

Prediction predict(const EcgRecord& record, const Pipeline& pipeline,
                   const std::optional<std::array<double, 4>>& external) {
  record.validate();
  Prediction out;
  out.record_id = record.id;
  Segmented seg;
  try {
    seg = segment_record(record, pipeline.featurizer.detector);
  } catch (const Error& e) {
    if (e.code() != Errc::ZeroVariance && e.code() != Errc::NoBeats && e.code() != Errc::RecordTooShort) throw;
    out.fallback = true;
    out.fallback_reason = std::string(errc_name(e.code()));
    out.scores = {0.0, 0.0, 0.0, 1.0};
    out.label = RhythmClass::Noisy;
    return out;
  }
  require(!external || pipeline.blender.has_external, Errc::ShapeMismatch,
          "external scores given but the blender was trained without them");
  const auto prepared = prepare_record(seg, pipeline.featurizer);
  const auto outputs = run_members(pipeline.ensemble, prepared.features);
  const auto pv = assemble(outputs, prepared.record_feats, external);
  out.level1_scores = pv.level1_scores;
  const Eigen::Vector4d p = pipeline.blender.predict(pv.to_vector(pipeline.blender.has_external));
  Eigen::Index best = 0;
  p.maxCoeff(&best);
  for (int c = 0; c < 4; ++c) out.scores[static_cast<std::size_t>(c)] = p[c];
  out.label = rhythm_from_code(static_cast<int>(best));
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (outputs[i].attention.size() == 0) continue;
    AttentionTrace t;
    t.member_id = pipeline.ensemble.spec.members[i].id;
    t.r_indices = prepared.beats.r_indices;
    t.weights = outputs[i].attention;
    t.confidence = outputs[i].probs[1];
    out.attention.push_back(std::move(t));
  }
  return out;
}

F1Report evaluate_f1(std::span<const RhythmClass> predictions, std::span<const RhythmClass> truth) {
  require(predictions.size() == truth.size(), Errc::LengthMismatch,
          fmt::format("{} predictions for {} labels", predictions.size(), truth.size()));
  require(!truth.empty(), Errc::EmptyDataset, "nothing to score");
  std::array<std::size_t, 4> tp{}, fp{}, fn{};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto p = static_cast<std::size_t>(code(predictions[i]));
    const auto t = static_cast<std::size_t>(code(truth[i]));
    if (p == t) {
      ++tp[t];
    } else {
      ++fp[p];
      ++fn[t];
    }
  }
  F1Report r;
  for (std::size_t c = 0; c < 4; ++c) {
    const double denom = static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
    r.per_class[c] = denom > 0 ? 2.0 * static_cast<double>(tp[c]) / denom : 0.0;
  }
  r.average = (r.per_class[0] + r.per_class[1] + r.per_class[2]) / 3.0;
  return r;
}

}  // namespace beatnet

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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace beatnet {

// Stable integer codes are used in every serialized form.
enum class RhythmClass : int { Normal = 0, AF = 1, Other = 2, Noisy = 3 };

inline constexpr int kNumClasses = 4;
inline constexpr double kDefaultFs = 300.0;

std::string_view to_string(RhythmClass c) noexcept;
// Accepts "Normal"/"AF"/"Other"/"Noisy", challenge letters N/A/O/~, or 0-3.
RhythmClass parse_rhythm(std::string_view text);
inline int code(RhythmClass c) noexcept { return static_cast<int>(c); }
RhythmClass rhythm_from_code(int code);

struct EcgRecord {
  std::string id;
  double fs = kDefaultFs;
  Eigen::VectorXd samples;
  std::optional<RhythmClass> label;

  Eigen::Index size() const noexcept { return samples.size(); }
  // Throws InvalidArgument / EmptyRecord when an invariant is broken.
  void validate() const;
};

struct SynthConfig {
  double duration_s = 30.0;
  double fs = kDefaultFs;
  double mean_rr_s = 0.909;
  double rr_jitter = 0.0;
  RhythmClass rhythm = RhythmClass::Normal;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  // Other rhythm only: a beat is dropped every `pause_period` beats
  // (a 2xRR pause). 0 places exactly one pause at a random beat.
  int pause_period = 5;

  void validate() const;
};

struct SynthResult {
  EcgRecord record;
  std::vector<Eigen::Index> true_r_indices;
  // Indices into true_r_indices of beats that follow a 2xRR pause.
  std::vector<std::size_t> pause_beats;
};

EcgRecord load_record(const std::filesystem::path& path, double fs);
void save_record(const EcgRecord& record, const std::filesystem::path& path);

EcgRecord normalize(const EcgRecord& record);

SynthResult synthesize_ecg(const SynthConfig& config);

// Settings for record `index` of a labelled synthetic corpus. Rhythms cycle
// Normal, AF, Other, Noisy; Other records alternate between a pause every
// 5 beats and a single isolated pause. The mean RR interval is drawn per
// record from [0.75, 1.05] s. Record seeds are derive_seed(seed, index).
SynthConfig corpus_config(std::uint64_t seed, std::size_t index, double noise_std);

void save_indices(const std::vector<Eigen::Index>& indices, const std::filesystem::path& path);
std::vector<Eigen::Index> load_indices(const std::filesystem::path& path);

}  // namespace beatnet

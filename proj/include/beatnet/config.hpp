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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "beatnet/nn/model.hpp"
#include "beatnet/pipeline.hpp"
#include "beatnet/sdae.hpp"
#include "beatnet/segmentation.hpp"

namespace beatnet {

// A member entry of the "level1.members" list. Fields not given inherit
// from the level1 base config.
struct MemberOverride {
  std::string id;
  std::vector<RhythmClass> targets;
  nlohmann::json overrides;  // subset of TrainConfig keys, plus "attention"
};

// Everything a run needs, read from one JSON file. Unknown keys are rejected.
//
// Seed splitting: every stage draws its own 64-bit substream from `seed`:
//   sdae beat model   derive_seed(seed, "sdae:beats")
//   sdae coeff model  derive_seed(seed, "sdae:coeffs")
//   level-1 member i  derive_seed(derive_seed(seed, "level1"), "member:<i>")
//   blender           derive_seed(seed, "blender")
//   synthetic record  derive_seed(seed, <record index>)
struct RunConfig {
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0 = hardware concurrency
  double noise_std = 0.05;
  DetectorConfig detector;
  SdaeConfig sdae;
  nn::TrainConfig level1;
  std::optional<std::vector<MemberOverride>> members;
  BlenderConfig blender;

  void validate() const;
};

RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

SdaeConfig sdae_config(const RunConfig& config, const std::string& domain);
EnsembleSpec ensemble_spec(const RunConfig& config);
BlenderConfig blender_config(const RunConfig& config);

nlohmann::json to_json(const DetectorConfig& c);
nlohmann::json to_json(const SdaeConfig& c);
nlohmann::json to_json(const nn::TrainConfig& c);
nlohmann::json to_json(const BlenderConfig& c);
DetectorConfig detector_from_json(const nlohmann::json& j);
SdaeConfig sdae_from_json(const nlohmann::json& j);
nn::TrainConfig train_config_from_json(const nlohmann::json& j, nn::TrainConfig base = {});
BlenderConfig blender_from_json(const nlohmann::json& j);

// Model directory layout shared by the CLI stages:
//   sdae_beats.sdae, sdae_coeffs.sdae      train-sdae
//   ensemble.json, member_<i>.sqmd         train
//   blender.blnd                           blend
void save_ensemble(const Ensemble& ensemble, const DetectorConfig& detector, const std::filesystem::path& dir);
Ensemble load_ensemble(const std::filesystem::path& dir, DetectorConfig* detector = nullptr);
Pipeline load_pipeline(const std::filesystem::path& dir);

}  // namespace beatnet

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

#include "beatnet/config.hpp"

#include <fmt/format.h>

#include <set>

#include "beatnet/errors.hpp"
#include "beatnet/io_util.hpp"
#include "beatnet/nn/model_io.hpp"
#include "beatnet/random.hpp"

namespace beatnet {

using nlohmann::json;

namespace {

// Reads known keys from one JSON object and rejects everything else.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    require(j.is_object(), Errc::InvalidConfig, fmt::format("{} must be a JSON object", where_));
  }

  template <typename T>
  void get(const char* key, T& out) {
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    check_type<T>(*it, key);
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      fail(Errc::InvalidConfig, fmt::format("{}.{}: {}", where_, key, e.what()));
    }
  }

  const json* child(const char* key) {
    const auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  void skip(const char* key) { seen_.insert(key); }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) fail(Errc::InvalidConfig, fmt::format("unknown key '{}.{}'", where_, item.key()));
    }
  }

 private:
  template <typename T>
  void check_type(const json& v, const char* key) const {
    bool ok = true;
    if constexpr (std::is_same_v<T, bool>) {
      ok = v.is_boolean();
    } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
      ok = v.is_number_unsigned();
    } else if constexpr (std::is_integral_v<T>) {
      ok = v.is_number_integer();
    } else if constexpr (std::is_floating_point_v<T>) {
      ok = v.is_number();
    }
    require(ok, Errc::InvalidConfig, fmt::format("{}.{} has the wrong type", where_, key));
  }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::vector<RhythmClass> parse_targets(const json& j, const std::string& where) {
  require(j.is_array(), Errc::InvalidConfig, fmt::format("{}.targets must be an array", where));
  std::vector<RhythmClass> out;
  for (const auto& t : j) {
    require(t.is_string(), Errc::InvalidConfig, fmt::format("{}.targets entries must be class names", where));
    try {
      out.push_back(parse_rhythm(t.get<std::string>()));
    } catch (const Error& e) {
      fail(Errc::InvalidConfig, fmt::format("{}.targets: {}", where, e.what()));
    }
  }
  return out;
}

json targets_json(const std::vector<RhythmClass>& targets) {
  json arr = json::array();
  for (auto t : targets) arr.push_back(std::string(to_string(t)));
  return arr;
}

}  // namespace

json to_json(const DetectorConfig& c) {
  return {{"deriv_kernel", c.deriv_kernel},         {"integration_window_s", c.integration_window_s},
          {"refractory_s", c.refractory_s},         {"ma_window_s", c.ma_window_s},
          {"threshold_scale", c.threshold_scale},   {"search_radius_s", c.search_radius_s},
          {"min_peak_ratio", c.min_peak_ratio}};
}

DetectorConfig detector_from_json(const json& j) {
  DetectorConfig c;
  ObjectReader r(j, "detector");
  r.get("deriv_kernel", c.deriv_kernel);
  r.get("integration_window_s", c.integration_window_s);
  r.get("refractory_s", c.refractory_s);
  r.get("ma_window_s", c.ma_window_s);
  r.get("threshold_scale", c.threshold_scale);
  r.get("search_radius_s", c.search_radius_s);
  r.get("min_peak_ratio", c.min_peak_ratio);
  r.finish();
  c.validate();
  return c;
}

json to_json(const SdaeConfig& c) {
  return {{"hidden", c.hidden},
          {"code", c.code},
          {"corruption_rate", c.corruption_rate},
          {"pretrain_epochs", c.pretrain_epochs},
          {"finetune_epochs", c.finetune_epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"max_inputs", c.max_inputs}};
}

SdaeConfig sdae_from_json(const json& j) {
  SdaeConfig c;
  ObjectReader r(j, "sdae");
  r.get("hidden", c.hidden);
  r.get("code", c.code);
  r.get("corruption_rate", c.corruption_rate);
  r.get("pretrain_epochs", c.pretrain_epochs);
  r.get("finetune_epochs", c.finetune_epochs);
  r.get("batch_size", c.batch_size);
  r.get("learning_rate", c.learning_rate);
  r.get("max_inputs", c.max_inputs);
  r.finish();
  c.validate();
  return c;
}

json to_json(const nn::TrainConfig& c) {
  return {{"dropout", c.dropout},
          {"recurrent_dropout", c.recurrent_dropout},
          {"hidden", c.hidden},
          {"recurrent_layers", c.recurrent_layers},
          {"forward_layers", c.forward_layers},
          {"attention", c.attention},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"clip_norm", c.clip_norm},
          {"seed", c.seed}};
}

nn::TrainConfig train_config_from_json(const json& j, nn::TrainConfig c) {
  ObjectReader r(j, "level1");
  r.get("dropout", c.dropout);
  r.get("recurrent_dropout", c.recurrent_dropout);
  r.get("hidden", c.hidden);
  r.get("recurrent_layers", c.recurrent_layers);
  r.get("forward_layers", c.forward_layers);
  r.get("attention", c.attention);
  r.get("epochs", c.epochs);
  r.get("learning_rate", c.learning_rate);
  r.get("clip_norm", c.clip_norm);
  r.get("seed", c.seed);
  r.skip("members");
  r.skip("id");
  r.skip("targets");
  r.finish();
  c.validate();
  return c;
}

json to_json(const BlenderConfig& c) {
  return {{"hidden", c.hidden},   {"hidden_layers", c.hidden_layers}, {"epochs", c.epochs},
          {"learning_rate", c.learning_rate}, {"dropout", c.dropout}, {"batch_size", c.batch_size}};
}

BlenderConfig blender_from_json(const json& j) {
  BlenderConfig c;
  ObjectReader r(j, "blender");
  r.get("hidden", c.hidden);
  r.get("hidden_layers", c.hidden_layers);
  r.get("epochs", c.epochs);
  r.get("learning_rate", c.learning_rate);
  r.get("dropout", c.dropout);
  r.get("batch_size", c.batch_size);
  r.finish();
  c.validate();
  return c;
}

void RunConfig::validate() const {
  require(noise_std >= 0, Errc::InvalidConfig, "noise_std must be >= 0");
  detector.validate();
  sdae.validate();
  level1.validate();
  blender.validate();
  ensemble_spec(*this).validate();
}

RunConfig parse_config(const json& j) {
  RunConfig c;
  ObjectReader r(j, "config");
  r.get("seed", c.seed);
  r.get("threads", c.threads);
  r.get("noise_std", c.noise_std);
  if (const auto* d = r.child("detector")) c.detector = detector_from_json(*d);
  if (const auto* s = r.child("sdae")) c.sdae = sdae_from_json(*s);
  if (const auto* l = r.child("level1")) {
    require(!l->contains("seed"), Errc::InvalidConfig, "level1 seeds come from the top-level seed");
    c.level1 = train_config_from_json(*l, c.level1);
    if (const auto m = l->find("members"); m != l->end()) {
      require(m->is_array(), Errc::InvalidConfig, "level1.members must be an array");
      std::vector<MemberOverride> members;
      for (std::size_t i = 0; i < m->size(); ++i) {
        const auto& e = (*m)[i];
        const std::string where = fmt::format("level1.members[{}]", i);
        require(e.is_object() && e.contains("id") && e["id"].is_string() && e.contains("targets"),
                Errc::InvalidConfig, fmt::format("{} needs a string id and targets", where));
        require(!e.contains("seed") && !e.contains("members"), Errc::InvalidConfig,
                fmt::format("{} cannot set seed or members", where));
        MemberOverride mo;
        mo.id = e["id"].get<std::string>();
        mo.targets = parse_targets(e["targets"], where);
        mo.overrides = e;
        members.push_back(std::move(mo));
      }
      c.members = std::move(members);
    }
  }
  if (const auto* b = r.child("blender")) c.blender = blender_from_json(*b);
  r.finish();
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(Errc::MissingFile, path.string());
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    fail(Errc::ParseError, fmt::format("{}: {}", path.string(), e.what()));
  }
  return parse_config(j);
}

json to_json(const RunConfig& c) {
  json l1 = to_json(c.level1);
  l1.erase("seed");
  if (c.members) {
    json arr = json::array();
    for (const auto& m : *c.members) arr.push_back(m.overrides);
    l1["members"] = arr;
  }
  return {{"seed", c.seed},           {"threads", c.threads}, {"noise_std", c.noise_std},
          {"detector", to_json(c.detector)}, {"sdae", to_json(c.sdae)}, {"level1", l1},
          {"blender", to_json(c.blender)}};
}

SdaeConfig sdae_config(const RunConfig& config, const std::string& domain) {
  SdaeConfig s = config.sdae;
  s.seed = derive_seed(config.seed, "sdae:" + domain);
  return s;
}

EnsembleSpec ensemble_spec(const RunConfig& config) {
  const auto level1_seed = derive_seed(config.seed, "level1");
  if (!config.members) return default_ensemble_spec(config.level1, level1_seed);
  EnsembleSpec spec;
  for (std::size_t i = 0; i < config.members->size(); ++i) {
    const auto& mo = (*config.members)[i];
    EnsembleMember m;
    m.id = mo.id;
    m.targets = mo.targets;
    m.config = train_config_from_json(mo.overrides, config.level1);
    m.config.seed = derive_seed(level1_seed, fmt::format("member:{}", i));
    spec.members.push_back(std::move(m));
  }
  return spec;
}

BlenderConfig blender_config(const RunConfig& config) {
  BlenderConfig b = config.blender;
  b.seed = derive_seed(config.seed, "blender");
  return b;
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kEnsembleFormat = "beatnet-ensemble";

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_std(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void save_ensemble(const Ensemble& ensemble, const DetectorConfig& detector, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json members = json::array();
  for (std::size_t i = 0; i < ensemble.models.size(); ++i) {
    const auto& m = ensemble.spec.members[i];
    const auto file = fmt::format("member_{:02d}.sqmd", i);
    const auto loss_file = fmt::format("member_{:02d}_loss.csv", i);
    nn::save_model(ensemble.models[i], dir / file);
    nn::save_loss_history(ensemble.loss_histories[i], dir / loss_file);
    members.push_back({{"id", m.id},
                       {"targets", targets_json(m.targets)},
                       {"config", to_json(m.config)},
                       {"negative_class", std::string(to_string(ensemble.negative_class[i]))},
                       {"file", file},
                       {"loss_file", loss_file}});
  }
  const json j = {{"format", kEnsembleFormat},
                  {"version", 1},
                  {"input_dim", ensemble.scaler.mean.size()},
                  {"detector", to_json(detector)},
                  {"scaler", {{"mean", to_std(ensemble.scaler.mean)}, {"scale", to_std(ensemble.scaler.scale)}}},
                  {"train_ids", ensemble.train_ids},
                  {"members", members}};
  io::write_atomic(dir / "ensemble.json", j.dump(2) + "\n");
}

Ensemble load_ensemble(const std::filesystem::path& dir, DetectorConfig* detector) {
  const auto path = dir / "ensemble.json";
  if (!std::filesystem::exists(path)) fail(Errc::MissingFile, path.string());
  Ensemble ens;
  try {
    const json j = json::parse(io::read_file(path));
    if (j.at("format") != kEnsembleFormat || j.at("version") != 1) {
      fail(Errc::InvalidModelFile, fmt::format("{}: not an ensemble description", path.string()));
    }
    if (detector) *detector = detector_from_json(j.at("detector"));
    ens.scaler.mean = from_std(j.at("scaler").at("mean").get<std::vector<double>>());
    ens.scaler.scale = from_std(j.at("scaler").at("scale").get<std::vector<double>>());
    ens.train_ids = j.at("train_ids").get<std::vector<std::string>>();
    for (const auto& m : j.at("members")) {
      EnsembleMember em;
      em.id = m.at("id").get<std::string>();
      em.targets = parse_targets(m.at("targets"), em.id);
      em.config = train_config_from_json(m.at("config"));
      ens.spec.members.push_back(em);
      ens.negative_class.push_back(parse_rhythm(m.at("negative_class").get<std::string>()));
      ens.models.push_back(nn::load_model(dir / m.at("file").get<std::string>()));
      ens.loss_histories.emplace_back();
    }
  } catch (const json::exception& e) {
    fail(Errc::InvalidModelFile, fmt::format("{}: {}", path.string(), e.what()));
  }
  ens.spec.validate();
  require(ens.scaler.mean.size() == ens.scaler.scale.size(), Errc::InvalidModelFile, "scaler size mismatch");
  for (const auto& m : ens.models) {
    require(m.shape.input_dim == ens.scaler.mean.size() && m.shape.n_classes == 2, Errc::InvalidModelFile,
            "member shape does not match the ensemble");
  }
  return ens;
}

Pipeline load_pipeline(const std::filesystem::path& dir) {
  Pipeline p;
  p.ensemble = load_ensemble(dir, &p.featurizer.detector);
  p.featurizer.sdae_beat = load_sdae(dir / "sdae_beats.sdae");
  p.featurizer.sdae_coeff = load_sdae(dir / "sdae_coeffs.sdae");
  p.blender = load_blender(dir / "blender.blnd");
  const auto dim = PredictionVector::dimension_for(p.ensemble.models.size(), p.blender.has_external);
  require(p.blender.input_dim() == dim, Errc::InvalidModelFile,
          fmt::format("blender expects {} inputs, the ensemble produces {}", p.blender.input_dim(), dim));
  return p;
}

}  // namespace beatnet

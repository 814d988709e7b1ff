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

#include "beatnet/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <chrono>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include "beatnet/config.hpp"
#include "beatnet/errors.hpp"
#include "beatnet/features.hpp"
#include "beatnet/io_util.hpp"
#include "beatnet/nn/model_io.hpp"
#include "beatnet/pipeline.hpp"
#include "beatnet/svg.hpp"

namespace beatnet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Records what a command wrote and how long each stage took; saved as
// <command>.manifest.json next to the outputs.
class Manifest {
 public:
  Manifest(std::string command, std::string config, std::uint64_t seed)
      : command_(std::move(command)), config_(std::move(config)), seed_(seed) {}

  template <typename Fn>
  auto stage(const std::string& name, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    auto finish = [&] {
      timings_[name] +=
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    };
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      finish();
    } else {
      auto result = fn();
      finish();
      return result;
    }
  }

  void wrote(const fs::path& p) { artifacts_.push_back(p.string()); }

  void save(const fs::path& dir) {
    json j = {{"command", command_},
              {"config", config_.empty() ? json(nullptr) : json(config_)},
              {"seed", seed_},
              {"stage_timings_ms", timings_},
              {"artifacts", artifacts_}};
    const auto path = (dir.empty() ? fs::path(".") : dir) / (command_ + ".manifest.json");
    fs::create_directories(path.parent_path());
    io::write_atomic(path, j.dump(2) + "\n");
  }

 private:
  std::string command_;
  std::string config_;
  std::uint64_t seed_;
  std::map<std::string, double> timings_;
  std::vector<std::string> artifacts_;
};

struct DataEntry {
  std::string id;
  RhythmClass label;
  std::string split;
};

std::string split_for(std::size_t index) {
  // Positional 60/20/20 split over blocks of one record per class.
  const auto block = (index / kNumClasses) % 5;
  return block < 3 ? "train" : block == 3 ? "valid" : "test";
}

std::vector<std::string_view> csv_lines(const std::string& text) {
  std::vector<std::string_view> lines;
  for (auto line : io::split(text, '\n')) {
    line = io::trim(line);
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

// Column index by header name, or -1.
int column(const std::vector<std::string_view>& header, std::string_view name) {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

std::vector<DataEntry> read_labels(const fs::path& path) {
  if (!fs::exists(path)) fail(Errc::MissingFile, path.string());
  const auto text = io::read_file(path);
  const auto lines = csv_lines(text);
  if (lines.empty()) fail(Errc::ParseError, fmt::format("{}: empty label file", path.string()));
  const auto header = io::split(lines[0], ',');
  const int id_col = column(header, "record_id");
  const int label_col = column(header, "label");
  const int split_col = column(header, "split");
  if (id_col < 0 || label_col < 0) {
    fail(Errc::ParseError, fmt::format("{}: header needs record_id and label columns", path.string()));
  }
  std::vector<DataEntry> out;
  std::set<std::string> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = io::split(lines[i], ',');
    if (f.size() != header.size()) {
      throw Error(Errc::ParseError, fmt::format("{}: wrong field count", path.string()), i + 1);
    }
    DataEntry e;
    e.id = std::string(f[static_cast<std::size_t>(id_col)]);
    try {
      e.label = parse_rhythm(f[static_cast<std::size_t>(label_col)]);
    } catch (const Error&) {
      throw Error(Errc::ParseError, fmt::format("{}: bad label '{}'", path.string(), f[static_cast<std::size_t>(label_col)]),
                  i + 1);
    }
    if (split_col >= 0) e.split = std::string(f[static_cast<std::size_t>(split_col)]);
    if (!seen.insert(e.id).second) fail(Errc::ParseError, fmt::format("{}: duplicate record '{}'", path.string(), e.id));
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<DataEntry> entries_for_split(const fs::path& data, const std::string& split) {
  auto all = read_labels(data / "labels.csv");
  std::vector<DataEntry> out;
  for (auto& e : all) {
    if (split == "all" || e.split == split) out.push_back(std::move(e));
  }
  if (out.empty()) fail(Errc::EmptyDataset, fmt::format("no records in split '{}' of {}", split, data.string()));
  return out;
}

EcgRecord load_entry(const fs::path& data, const DataEntry& e, double fs_hz) {
  auto r = load_record(data / "records" / (e.id + ".csv"), fs_hz);
  r.id = e.id;
  r.label = e.label;
  return r;
}

bool is_segmentation_failure(const Error& e) {
  return e.code() == Errc::ZeroVariance || e.code() == Errc::NoBeats || e.code() == Errc::RecordTooShort;
}

std::map<std::string, std::array<double, 4>> read_external(const fs::path& path) {
  if (!fs::exists(path)) fail(Errc::MissingFile, path.string());
  const auto text = io::read_file(path);
  const auto lines = csv_lines(text);
  std::map<std::string, std::array<double, 4>> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = io::split(lines[i], ',');
    if (f.size() != 5) throw Error(Errc::ParseError, fmt::format("{}: expected 5 fields", path.string()), i + 1);
    std::array<double, 4> s{};
    for (std::size_t k = 0; k < 4; ++k) {
      const auto v = io::parse_double(f[k + 1]);
      if (!v) throw Error(Errc::ParseError, fmt::format("{}: bad score", path.string()), i + 1);
      s[k] = *v;
    }
    out[std::string(f[0])] = s;
  }
  return out;
}

std::optional<std::array<double, 4>> external_for(const std::map<std::string, std::array<double, 4>>* ext,
                                                  const std::string& id) {
  if (!ext) return std::nullopt;
  const auto it = ext->find(id);
  if (it == ext->end()) fail(Errc::InvalidArgument, fmt::format("no external scores for record '{}'", id));
  return it->second;
}

std::string fmtd(double v) { return io::format_double(v); }

fs::path parent_dir(const fs::path& file) {
  return file.has_parent_path() ? file.parent_path() : fs::path(".");
}

void write_file(Manifest& m, const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  io::write_atomic(path, contents);
  m.wrote(path);
}

// Shared option state; each subcommand reads the fields it declares.
struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<double> noise;
  double fs_hz = kDefaultFs;
  double duration = 30.0;
  std::size_t n = 0;
  std::string out, data, model, record, split, labels, predictions, external, attention_out, member;
  std::vector<std::string> records;
};

RunConfig resolve_config(const Options& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  if (o.noise) c.noise_std = *o.noise;
  c.validate();
  return c;
}

Featurizer featurizer_from(const fs::path& model_dir, const DetectorConfig& detector) {
  Featurizer f;
  f.detector = detector;
  f.sdae_beat = load_sdae(model_dir / "sdae_beats.sdae");
  f.sdae_coeff = load_sdae(model_dir / "sdae_coeffs.sdae");
  return f;
}

// Prepares every entry, skipping records the detector cannot segment.
std::vector<PreparedRecord> prepare_entries(const fs::path& data, const std::vector<DataEntry>& entries,
                                            const Featurizer& f, double fs_hz, std::ostream& err) {
  std::vector<PreparedRecord> out;
  for (const auto& e : entries) {
    try {
      const auto seg = segment_record(load_entry(data, e, fs_hz), f.detector);
      out.push_back(prepare_record(seg, f, e.label));
    } catch (const Error& ex) {
      if (!is_segmentation_failure(ex)) throw;
      fmt::print(err, "warning: skipping {}: {}\n", e.id, ex.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

void cmd_synth(const Options& o, Manifest& m, std::ostream& out) {
  require(o.n >= 1, Errc::InvalidConfig, "--n must be >= 1");
  const auto cfg = resolve_config(o);
  const fs::path dir = o.out;
  std::string labels = "record_id,label,split\n";
  m.stage("synthesize", [&] {
    for (std::size_t i = 0; i < o.n; ++i) {
      auto sc = corpus_config(cfg.seed, i, cfg.noise_std);
      sc.duration_s = o.duration;
      sc.fs = o.fs_hz;
      auto res = synthesize_ecg(sc);
      res.record.id = fmt::format("rec{:05d}", i);
      const auto rec_path = dir / "records" / (res.record.id + ".csv");
      const auto truth_path = dir / "truth" / (res.record.id + ".csv");
      fs::create_directories(rec_path.parent_path());
      fs::create_directories(truth_path.parent_path());
      save_record(res.record, rec_path);
      save_indices(res.true_r_indices, truth_path);
      m.wrote(rec_path);
      m.wrote(truth_path);
      labels += fmt::format("{},{},{}\n", res.record.id, to_string(sc.rhythm), split_for(i));
    }
  });
  write_file(m, dir / "labels.csv", labels);
  fmt::print(out, "wrote {} records to {}\n", o.n, dir.string());
  m.save(dir);
}

void cmd_segment(const Options& o, Manifest& m, std::ostream& out) {
  const auto cfg = resolve_config(o);
  const auto rec = load_record(o.record, o.fs_hz);
  const auto seg = m.stage("segment", [&] { return segment_record(rec, cfg.detector); });
  std::string csv = "beat_index,r_sample_index,delta_rr\n";
  for (Eigen::Index t = 0; t < seg.beats.size(); ++t) {
    csv += fmt::format("{},{},{}\n", t, seg.beats.r_indices[static_cast<std::size_t>(t)], fmtd(seg.beats.delta_rr[t]));
  }
  write_file(m, o.out, csv);
  fmt::print(out, "{}: {} beats from {} samples\n", rec.id, seg.beats.size(), rec.size());
  m.save(parent_dir(o.out));
}

void cmd_features(const Options& o, Manifest& m, std::ostream& out) {
  const auto cfg = resolve_config(o);
  const auto f = featurizer_from(o.model, cfg.detector);
  const auto rec = load_record(o.record, o.fs_hz);
  const auto p = m.stage("features", [&] { return prepare_record(segment_record(rec, f.detector), f); });
  std::string csv = "beat_index,r_sample_index";
  for (const auto& name : beat_feature_names()) csv += "," + name;
  csv += '\n';
  for (Eigen::Index t = 0; t < p.features.cols(); ++t) {
    csv += fmt::format("{},{}", t, p.beats.r_indices[static_cast<std::size_t>(t)]);
    for (Eigen::Index k = 0; k < p.features.rows(); ++k) csv += "," + fmtd(p.features(k, t));
    csv += '\n';
  }
  write_file(m, o.out, csv);
  const auto rv = p.record_feats.to_vector();
  std::string rcsv = "record_id,rwe_whole1,rwe_whole2,rwe_whole3,rwe_whole4,rwe_whole5,we_whole,aad_we,aad_delta_rr\n" + p.id;
  for (Eigen::Index k = 0; k < rv.size(); ++k) rcsv += "," + fmtd(rv[k]);
  rcsv += '\n';
  fs::path rpath = o.out;
  rpath.replace_extension(".record.csv");
  write_file(m, rpath, rcsv);
  fmt::print(out, "{}: {} beats x {} features\n", p.id, p.features.cols(), p.features.rows());
  m.save(parent_dir(o.out));
}

void cmd_train_sdae(const Options& o, Manifest& m, std::ostream& out, std::ostream& err) {
  const auto cfg = resolve_config(o);
  const fs::path dir = o.model;
  const auto entries = entries_for_split(o.data, "train");
  std::vector<Eigen::VectorXd> beats, coeffs;
  m.stage("segment", [&] {
    for (const auto& e : entries) {
      try {
        const auto seg = segment_record(load_entry(o.data, e, o.fs_hz), cfg.detector);
        auto b = beat_inputs(seg.beats);
        auto c = coefficient_inputs(seg.beats);
        beats.insert(beats.end(), b.begin(), b.end());
        coeffs.insert(coeffs.end(), c.begin(), c.end());
      } catch (const Error& ex) {
        if (!is_segmentation_failure(ex)) throw;
        fmt::print(err, "warning: skipping {}: {}\n", e.id, ex.what());
      }
    }
  });
  fs::create_directories(dir);
  for (const auto& [domain, inputs] : {std::pair{std::string("beats"), &beats}, std::pair{std::string("coeffs"), &coeffs}}) {
    const auto res = m.stage("train_" + domain, [&] { return train_sdae(*inputs, sdae_config(cfg, domain), domain); });
    const auto path = dir / fmt::format("sdae_{}.sdae", domain);
    save_sdae(res.model, path);
    m.wrote(path);
    std::string csv = "epoch,stage,mse\n";
    auto add = [&](const std::vector<double>& h, const char* stage) {
      for (std::size_t i = 0; i < h.size(); ++i) csv += fmt::format("{},{},{}\n", i + 1, stage, fmtd(h[i]));
    };
    add(res.layer1_history, "layer1");
    add(res.layer2_history, "layer2");
    add(res.finetune_history, "finetune");
    write_file(m, dir / fmt::format("sdae_{}_loss.csv", domain), csv);
    fmt::print(out, "sdae {}: {} inputs, first-epoch mse {:.6g}, final mse {:.6g}\n", domain, inputs->size(),
               res.layer1_history.empty() ? 0.0 : res.layer1_history.front(), res.final_mse);
  }
  m.save(dir);
}

void cmd_train(const Options& o, Manifest& m, std::ostream& out, std::ostream& err) {
  const auto cfg = resolve_config(o);
  const fs::path dir = o.model;
  const auto f = featurizer_from(dir, cfg.detector);
  const auto train = m.stage("features", [&] { return prepare_entries(o.data, entries_for_split(o.data, "train"), f, o.fs_hz, err); });
  const auto spec = ensemble_spec(cfg);
  const auto ens = m.stage("train_level1", [&] { return train_ensemble(train, spec, cfg.threads); });
  save_ensemble(ens, cfg.detector, dir);
  m.wrote(dir / "ensemble.json");
  for (std::size_t i = 0; i < ens.models.size(); ++i) {
    m.wrote(dir / fmt::format("member_{:02d}.sqmd", i));
    m.wrote(dir / fmt::format("member_{:02d}_loss.csv", i));
    fmt::print(out, "{}: final loss {:.6g}\n", spec.members[i].id,
               ens.loss_histories[i].empty() ? 0.0 : ens.loss_histories[i].back());
  }
  m.save(dir);
}

void cmd_blend(const Options& o, Manifest& m, std::ostream& out, std::ostream& err) {
  const auto cfg = resolve_config(o);
  const fs::path dir = o.model;
  DetectorConfig detector;
  const auto ens = load_ensemble(dir, &detector);
  const auto f = featurizer_from(dir, detector);
  std::optional<std::map<std::string, std::array<double, 4>>> ext;
  if (!o.external.empty()) ext = read_external(o.external);
  const auto valid = m.stage("features", [&] { return prepare_entries(o.data, entries_for_split(o.data, "valid"), f, o.fs_hz, err); });

  std::vector<Eigen::VectorXd> vectors;
  std::vector<RhythmClass> labels;
  std::vector<std::string> ids;
  std::string csv = "record_id,members,has_external,values\n";
  m.stage("assemble", [&] {
    for (const auto& r : valid) {
      const auto pv = assemble(ens, r.features, r.record_feats, external_for(ext ? &*ext : nullptr, r.id));
      csv += format_prediction_vector(r.id, pv) + "\n";
      vectors.push_back(pv.to_vector(ext.has_value()));
      labels.push_back(*r.label);
      ids.push_back(r.id);
    }
  });
  write_file(m, dir / "prediction_vectors_valid.csv", csv);
  const auto res = m.stage("train_blender", [&] {
    return train_blender(vectors, labels, ids, ens.train_ids, blender_config(cfg), ext.has_value());
  });
  save_blender(res.model, dir / "blender.blnd");
  m.wrote(dir / "blender.blnd");
  nn::save_loss_history(res.loss_history, dir / "blender_loss.csv");
  m.wrote(dir / "blender_loss.csv");
  fmt::print(out, "blender: {} validation vectors of dimension {}, final loss {:.6g}\n", vectors.size(),
             vectors.empty() ? 0 : vectors.front().size(), res.loss_history.empty() ? 0.0 : res.loss_history.back());
  m.save(dir);
}

std::string attention_rows(const Prediction& p, const std::string& member_filter) {
  std::string rows;
  for (const auto& a : p.attention) {
    if (!member_filter.empty() && a.member_id != member_filter) continue;
    for (std::size_t t = 0; t < a.r_indices.size(); ++t) {
      rows += fmt::format("{},{},{},{},{}\n", p.record_id, a.member_id, t, a.r_indices[t],
                          fmtd(a.weights[static_cast<Eigen::Index>(t)]));
    }
  }
  return rows;
}

constexpr const char* kAttentionHeader = "record_id,member_id,beat_index,r_sample_index,a_t\n";

void cmd_predict(const Options& o, Manifest& m, std::ostream& out) {
  const auto pipeline = m.stage("load", [&] { return load_pipeline(o.model); });
  std::optional<std::map<std::string, std::array<double, 4>>> ext;
  if (!o.external.empty()) ext = read_external(o.external);
  std::vector<EcgRecord> records;
  if (!o.data.empty()) {
    for (const auto& e : entries_for_split(o.data, o.split.empty() ? "test" : o.split)) {
      records.push_back(load_entry(o.data, e, o.fs_hz));
    }
  }
  for (const auto& r : o.records) records.push_back(load_record(r, o.fs_hz));
  require(!records.empty(), Errc::InvalidConfig, "give --data or --record");

  std::string csv = "record_id,Normal,AF,Other,Noisy,label\n";
  std::string att = kAttentionHeader;
  std::size_t fallbacks = 0;
  m.stage("predict", [&] {
    for (const auto& r : records) {
      const auto p = predict(r, pipeline, external_for(ext ? &*ext : nullptr, r.id));
      fallbacks += p.fallback ? 1 : 0;
      csv += fmt::format("{},{},{},{},{},{}\n", p.record_id, fmtd(p.scores[0]), fmtd(p.scores[1]), fmtd(p.scores[2]),
                         fmtd(p.scores[3]), to_string(p.label));
      att += attention_rows(p, o.member);
    }
  });
  write_file(m, o.out, csv);
  if (!o.attention_out.empty()) write_file(m, o.attention_out, att);
  fmt::print(out, "predicted {} records ({} segmentation fallbacks)\n", records.size(), fallbacks);
  m.save(parent_dir(o.out));
}

void cmd_eval(const Options& o, Manifest& m, std::ostream& out) {
  std::map<std::string, RhythmClass> truth;
  for (const auto& e : read_labels(o.labels)) truth[e.id] = e.label;
  std::vector<RhythmClass> pred, ref;
  for (const auto& e : read_labels(o.predictions)) {
    const auto it = truth.find(e.id);
    if (it == truth.end()) fail(Errc::InvalidArgument, fmt::format("no label for predicted record '{}'", e.id));
    pred.push_back(e.label);
    ref.push_back(it->second);
  }
  const auto r = m.stage("score", [&] { return evaluate_f1(pred, ref); });
  for (int c = 0; c < kNumClasses; ++c) {
    fmt::print(out, "F1 {:<6} {:.6g}\n", to_string(rhythm_from_code(c)), r.per_class[static_cast<std::size_t>(c)]);
  }
  fmt::print(out, "average {:.6g}\n", r.average);
  if (!o.out.empty()) {
    json j = {{"records", pred.size()}, {"average", r.average}};
    for (int c = 0; c < kNumClasses; ++c) {
      j["f1"][std::string(to_string(rhythm_from_code(c)))] = r.per_class[static_cast<std::size_t>(c)];
    }
    write_file(m, o.out, j.dump(2) + "\n");
    m.save(parent_dir(o.out));
  }
}

void cmd_attention(const Options& o, Manifest& m, std::ostream& out) {
  const auto pipeline = m.stage("load", [&] { return load_pipeline(o.model); });
  const fs::path dir = o.out;
  std::size_t written = 0;
  for (const auto& path : o.records) {
    const auto rec = load_record(path, o.fs_hz);
    const auto p = m.stage("predict", [&] { return predict(rec, pipeline); });
    if (p.fallback) fail(Errc::NoBeats, fmt::format("{}: no beats to plot ({})", rec.id, p.fallback_reason));
    const auto normalized = normalize(rec);
    for (const auto& a : p.attention) {
      if (!o.member.empty() && a.member_id != o.member) continue;
      const auto stem = fmt::format("{}_{}", rec.id, a.member_id);
      std::string csv = kAttentionHeader;
      for (std::size_t t = 0; t < a.r_indices.size(); ++t) {
        csv += fmt::format("{},{},{},{},{}\n", rec.id, a.member_id, t, a.r_indices[t],
                           fmtd(a.weights[static_cast<Eigen::Index>(t)]));
      }
      write_file(m, dir / (stem + ".csv"), csv);
      AttentionPlot plot;
      plot.title = fmt::format("{} | {} | P(positive) = {:.3f} | predicted {}", rec.id, a.member_id, a.confidence,
                               to_string(p.label));
      plot.fs = rec.fs;
      plot.samples = normalized.samples;
      plot.r_indices = a.r_indices;
      plot.weights = a.weights;
      write_file(m, dir / (stem + ".svg"), render_attention_svg(plot));
      ++written;
    }
  }
  if (written == 0) fail(Errc::InvalidArgument, "no attention-equipped member matched");
  fmt::print(out, "wrote {} attention plots to {}\n", written, dir.string());
  m.save(dir);
}

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::InvalidConfig: return kUsage;
    case Errc::NonFiniteLoss: return kDiverged;
    default: return kDataError;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"beatnet: beat-level ECG rhythm classification"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub, bool with_config) {
    if (with_config) {
      sub->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
      sub->add_option("--seed", o.seed, "root seed (overrides the config)");
    }
    sub->add_option("--fs", o.fs_hz, "sampling rate of record files in Hz")->check(CLI::PositiveNumber);
  };

  auto* synth = app.add_subcommand("synth", "generate a labelled synthetic corpus");
  synth->add_option("--n", o.n, "number of records")->required();
  synth->add_option("--out", o.out, "output directory")->required();
  synth->add_option("--noise", o.noise, "noise standard deviation");
  synth->add_option("--duration", o.duration, "record length in seconds")->check(CLI::PositiveNumber);
  common(synth, true);

  auto* segment = app.add_subcommand("segment", "detect R-peaks and list beats");
  segment->add_option("--record", o.record, "record CSV")->required();
  segment->add_option("--out", o.out, "beat CSV to write")->required();
  common(segment, true);

  auto* features = app.add_subcommand("features", "per-beat and record-level features");
  features->add_option("--record", o.record, "record CSV")->required();
  features->add_option("--model", o.model, "directory holding the trained autoencoders")->required();
  features->add_option("--out", o.out, "feature CSV to write")->required();
  common(features, true);

  auto* train_sdae_cmd = app.add_subcommand("train-sdae", "train the beat and coefficient autoencoders");
  train_sdae_cmd->add_option("--data", o.data, "corpus directory")->required();
  train_sdae_cmd->add_option("--model", o.model, "model directory to write")->required();
  common(train_sdae_cmd, true);

  auto* train = app.add_subcommand("train", "train the level-1 ensemble");
  train->add_option("--data", o.data, "corpus directory")->required();
  train->add_option("--model", o.model, "model directory")->required();
  train->add_option("--threads", o.threads, "worker threads (0 = all cores)");
  common(train, true);

  auto* blend = app.add_subcommand("blend", "train the level-2 blender on the validation split");
  blend->add_option("--data", o.data, "corpus directory")->required();
  blend->add_option("--model", o.model, "model directory")->required();
  blend->add_option("--external", o.external, "CSV of 4 caller-normalised external scores per record");
  common(blend, true);

  auto* predict_cmd = app.add_subcommand("predict", "score records with a trained pipeline");
  predict_cmd->add_option("--model", o.model, "model directory")->required();
  predict_cmd->add_option("--data", o.data, "corpus directory");
  predict_cmd->add_option("--split", o.split, "split of --data to score (default test, or all)");
  predict_cmd->add_option("--record", o.records, "record CSV (repeatable)");
  predict_cmd->add_option("--out", o.out, "prediction CSV to write")->required();
  predict_cmd->add_option("--attention-out", o.attention_out, "attention CSV to write");
  predict_cmd->add_option("--member", o.member, "restrict attention output to one member");
  predict_cmd->add_option("--external", o.external, "CSV of external scores");
  common(predict_cmd, false);

  auto* eval = app.add_subcommand("eval", "class-wise and challenge-average F1");
  eval->add_option("--predictions", o.predictions, "CSV with record_id and label columns")->required();
  eval->add_option("--labels", o.labels, "reference CSV with record_id and label columns")->required();
  eval->add_option("--out", o.out, "JSON metrics to write");

  auto* attention = app.add_subcommand("attention", "export attention factors as CSV and SVG");
  attention->add_option("--model", o.model, "model directory")->required();
  attention->add_option("--record", o.records, "record CSV (repeatable)")->required();
  attention->add_option("--out", o.out, "output directory")->required();
  attention->add_option("--member", o.member, "only this member");
  common(attention, false);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  auto* sub = app.get_subcommands().front();
  Manifest manifest(sub->get_name(), o.config, o.seed.value_or(0));
  try {
    if (!o.config.empty() || o.seed) manifest = Manifest(sub->get_name(), o.config, resolve_config(o).seed);
    if (sub == synth) cmd_synth(o, manifest, out);
    else if (sub == segment) cmd_segment(o, manifest, out);
    else if (sub == features) cmd_features(o, manifest, out);
    else if (sub == train_sdae_cmd) cmd_train_sdae(o, manifest, out, err);
    else if (sub == train) cmd_train(o, manifest, out, err);
    else if (sub == blend) cmd_blend(o, manifest, out, err);
    else if (sub == predict_cmd) cmd_predict(o, manifest, out);
    else if (sub == eval) cmd_eval(o, manifest, out);
    else if (sub == attention) cmd_attention(o, manifest, out);
  } catch (const Error& e) {
    err << "error: " << e.what();
    if (e.line()) err << " (line " << *e.line() << ")";
    err << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kOk;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace beatnet::cli

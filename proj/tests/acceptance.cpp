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

// Acceptance run: one PASS/FAIL line per criterion. Exit status is the number
// of failed criteria.

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <unistd.h>

#include "beatnet/cli.hpp"
#include "beatnet/config.hpp"
#include "beatnet/nn/train.hpp"
#include "beatnet/pipeline.hpp"
#include "beatnet/wavelets.hpp"

#ifndef BEATNET_SOURCE_DIR
#error "BEATNET_SOURCE_DIR must point at the source tree"
#endif

namespace fs = std::filesystem;
using namespace beatnet;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void cli_or_throw(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int rc = cli::run(args, out, err);
  if (rc != 0) throw std::runtime_error(fmt::format("beatnet {} exited {}: {}", args.front(), rc, err.str()));
}

class Workspace {
 public:
  Workspace() : root_(fs::temp_directory_path() / fmt::format("beatnet-acceptance-{}", ::getpid())) {
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  ~Workspace() {
    std::error_code ec;
    fs::remove_all(root_, ec);
  }
  fs::path operator/(const std::string& name) const { return root_ / name; }

 private:
  fs::path root_;
};

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// ---------------------------------------------------------------------------

Verdict gradient_integrity() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  int checks = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    for (int variant = 0; variant < 3; ++variant) {
      for (int d : {2, 4, 8}) {
        for (int steps : {1, 3, 7}) {
          Rng rng(derive_seed(seed, fmt::format("grad:{}:{}:{}", variant, d, steps)));
          nn::TrainConfig c;
          c.hidden = d;
          c.recurrent_layers = variant == 2 ? 2 : 1;
          c.forward_layers = variant == 2 ? 2 : 1;
          c.attention = variant > 0;
          c.seed = rng();
          const auto model = nn::build_model(c, 3, 2);
          const Eigen::MatrixXd x = random_matrix(3, steps, rng);
          const int label = static_cast<int>(rng() % 2);
          const double weight = variant == 2 ? std::uniform_real_distribution<double>(0.25, 3.0)(rng) : 1.0;
          worst = std::max(worst, nn::grad_check(model, x, label, weight));
          ++checks;
        }
      }
    }
  }
  const double elapsed = seconds_since(t0);
  return {worst < 1e-4 && elapsed < 60.0,
          fmt::format("worst relative error {:.3g} over {} checks in {:.1f} s", worst, checks, elapsed)};
}

// Independent oracle: the level-j analysis operator built as an explicit
// periodic matrix and applied in long double.
std::vector<std::vector<long double>> oracle_dwt(const std::vector<long double>& x, int levels) {
  const auto lo = scaling_filter<long double>("db4");
  const auto hi = wavelet_filter(lo);
  std::vector<std::vector<long double>> bands;  // d1..dL then aL
  std::vector<long double> a = x;
  for (int j = 0; j < levels; ++j) {
    const std::size_t n = a.size();
    std::vector<long double> na(n / 2, 0.0L), nd(n / 2, 0.0L);
    for (std::size_t k = 0; k < n / 2; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        long double lk = 0, hk = 0;
        for (Eigen::Index t = 0; t < lo.size(); ++t) {
          if ((2 * k + static_cast<std::size_t>(t)) % n == i) {
            lk += lo[t];
            hk += hi[t];
          }
        }
        na[k] += lk * a[i];
        nd[k] += hk * a[i];
      }
    }
    bands.push_back(nd);
    a = na;
  }
  bands.push_back(a);
  return bands;
}

Verdict wavelet_correctness() {
  // Parseval on random signals, including lengths that need zero padding.
  Rng rng(2024);
  double worst_parseval = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Index n = 32 + static_cast<Eigen::Index>(rng() % 400);
    const Eigen::VectorXd x = random_matrix(n, 1, rng);
    const auto dec = dwt(x);
    const double rel = std::abs(dec.flatten().squaredNorm() - x.squaredNorm()) / x.squaredNorm();
    worst_parseval = std::max(worst_parseval, rel);
  }

  // Impulse responses against the oracle, at several impulse positions.
  double worst_impulse = 0.0;
  for (std::size_t pos : {0u, 1u, 7u, 18u, 31u, 63u}) {
    std::vector<long double> x(64, 0.0L);
    x[pos] = 1.0L;
    const auto ref = oracle_dwt(x, kWaveletLevels);
    Eigen::VectorXd xd = Eigen::VectorXd::Zero(64);
    xd[static_cast<Eigen::Index>(pos)] = 1.0;
    const auto dec = dwt(xd);
    for (int j = 0; j < kWaveletLevels; ++j) {
      for (std::size_t k = 0; k < ref[static_cast<std::size_t>(j)].size(); ++k) {
        worst_impulse = std::max(worst_impulse, static_cast<double>(std::abs(
                                                    dec.detail[static_cast<std::size_t>(j)][static_cast<Eigen::Index>(k)] -
                                                    ref[static_cast<std::size_t>(j)][k])));
      }
    }
    for (std::size_t k = 0; k < ref.back().size(); ++k) {
      worst_impulse = std::max(worst_impulse,
                               static_cast<double>(std::abs(dec.approx[static_cast<Eigen::Index>(k)] - ref.back()[k])));
    }
  }

  // RWE simplex and WE range on every beat of a 600-record corpus.
  std::size_t beats = 0, violations = 0;
  const double ln5 = std::log(5.0);
  for (std::size_t i = 0; i < 600; ++i) {
    const auto s = synthesize_ecg(corpus_config(5, i, 0.05));
    const auto seg = segment_record(s.record, {});
    for (Eigen::Index t = 0; t < seg.beats.size(); ++t) {
      const auto e = wavelet_energies(dwt(seg.beats.windows.row(t).transpose().eval()));
      ++beats;
      const bool ok = (e.rwe.array() >= 0).all() && std::abs(e.rwe.sum() - 1.0) < 1e-9 && e.we >= 0 && e.we <= ln5;
      violations += ok ? 0 : 1;
    }
  }
  return {worst_parseval < 1e-6 && worst_impulse < 1e-9 && violations == 0,
          fmt::format("Parseval worst {:.2g}, impulse worst {:.2g}, {} violations over {} beats", worst_parseval,
                      worst_impulse, violations, beats)};
}

Verdict detector_quality() {
  std::size_t truth = 0, detected = 0, matched = 0;
  const Eigen::Index tol = 15;  // 50 ms at 300 Hz
  for (std::size_t i = 0; i < 200; ++i) {
    SynthConfig c;
    c.rhythm = rhythm_from_code(static_cast<int>(i % 3));
    c.noise_std = 0.1;
    c.seed = derive_seed(99, i);
    c.pause_period = (i / 3) % 2 == 0 ? 5 : 0;
    const auto s = synthesize_ecg(c);
    const auto peaks = segment_record(s.record, {}).beats.r_indices;
    truth += s.true_r_indices.size();
    detected += peaks.size();
    std::vector<bool> used(peaks.size(), false);
    for (auto r : s.true_r_indices) {
      for (std::size_t k = 0; k < peaks.size(); ++k) {
        if (!used[k] && std::abs(peaks[k] - r) <= tol) {
          used[k] = true;
          ++matched;
          break;
        }
      }
    }
  }
  const double sens = static_cast<double>(matched) / static_cast<double>(truth);
  const double ppv = static_cast<double>(matched) / static_cast<double>(detected);
  return {sens >= 0.99 && ppv >= 0.99,
          fmt::format("sensitivity {:.4f}, PPV {:.4f} ({} true, {} detected, noise 0.1)", sens, ppv, truth, detected)};
}

Verdict sequence_reduction() {
  SynthConfig c;
  c.duration_s = 30;
  c.fs = 300;
  c.mean_rr_s = 60.0 / 66.0;
  c.seed = 7;
  const auto s = synthesize_ecg(c);
  const auto seg = segment_record(s.record, {});
  const auto steps = seg.beats.size();
  const double ratio = static_cast<double>(s.record.size()) / static_cast<double>(steps);
  const double rel = std::abs(ratio - 9000.0 / 33.0) / (9000.0 / 33.0);
  return {std::abs(steps - 33) <= 1 && rel <= 0.05,
          fmt::format("T = {} beats for {} samples (ratio {:.1f}, {:.1f}% off)", steps, s.record.size(), ratio,
                      100 * rel)};
}

Verdict scoring_arithmetic() {
  std::vector<RhythmClass> truth, pred;
  auto add = [&](RhythmClass c, int tp, int fn) {
    for (int i = 0; i < tp; ++i) truth.push_back(c), pred.push_back(c);
    for (int i = 0; i < fn; ++i) truth.push_back(c), pred.push_back(RhythmClass::Noisy);
  };
  add(RhythmClass::Normal, 9, 2);
  add(RhythmClass::AF, 79, 42);
  add(RhythmClass::Other, 34, 32);
  const auto r = evaluate_f1(pred, truth);
  const bool classes = std::abs(r.per_class[0] - 0.90) < 1e-12 && std::abs(r.per_class[1] - 0.79) < 1e-12 &&
                       std::abs(r.per_class[2] - 0.68) < 1e-12;
  return {classes && std::abs(r.average - 0.79) <= 1e-9,
          fmt::format("F1 {:.2f}/{:.2f}/{:.2f} -> average {:.12f}", r.per_class[0], r.per_class[1], r.per_class[2],
                      r.average)};
}

// ---------------------------------------------------------------------------
// End-to-end benchmark shared by criteria 6, 7, 8 and 10.

struct Benchmark {
  std::string error;
  double wall_s = 0;
  F1Report blender;
  std::vector<std::pair<std::string, double>> members;
  int attention_hits = 0, attention_total = 0;
  double sdae_first[2] = {0, 0}, sdae_final[2] = {0, 0};
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  return out;
}

// record_id -> (label, split); split is empty when the file has no such column.
std::map<std::string, std::pair<RhythmClass, std::string>> read_label_file(const fs::path& p) {
  std::map<std::string, std::pair<RhythmClass, std::string>> out;
  std::istringstream in(slurp(p));
  std::string line;
  std::getline(in, line);
  const auto header = split_csv(line);
  auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int id_col = col("record_id"), label_col = col("label"), split_col = col("split");
  if (id_col < 0 || label_col < 0) throw std::runtime_error(p.string() + ": missing record_id/label columns");
  while (std::getline(in, line)) {
    const auto f = split_csv(line);
    out[f.at(static_cast<std::size_t>(id_col))] = {parse_rhythm(f.at(static_cast<std::size_t>(label_col))),
                                                   split_col < 0 ? "" : f.at(static_cast<std::size_t>(split_col))};
  }
  return out;
}

double first_mse(const fs::path& loss_csv) {
  std::istringstream in(slurp(loss_csv));
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  return std::stod(line.substr(line.rfind(',') + 1));
}

Benchmark run_benchmark(const Workspace& ws) {
  Benchmark b;
  const auto t0 = Clock::now();
  const std::string cfg = std::string(BEATNET_SOURCE_DIR) + "/tools/configs/desk.json";
  const auto data = (ws / "desk-data").string();
  const auto model = (ws / "desk-model").string();
  const auto pred = (ws / "desk-pred.csv").string();
  try {
    // 600 records: 360 level-1 training, 120 blender validation, 120 test.
    cli_or_throw({"synth", "--n", "600", "--out", data, "--config", cfg});
    cli_or_throw({"train-sdae", "--data", data, "--model", model, "--config", cfg});
    cli_or_throw({"train", "--data", data, "--model", model, "--config", cfg});
    cli_or_throw({"blend", "--data", data, "--model", model, "--config", cfg});
    cli_or_throw({"predict", "--model", model, "--data", data, "--split", "test", "--out", pred});
    b.wall_s = seconds_since(t0);

    const auto labels = read_label_file(fs::path(data) / "labels.csv");
    const auto predicted = read_label_file(pred);
    std::vector<RhythmClass> truth, blended;
    for (const auto& [id, p] : predicted) {
      truth.push_back(labels.at(id).first);
      blended.push_back(p.first);
    }
    b.blender = evaluate_f1(blended, truth);

    const auto pipeline = load_pipeline(model);
    const auto& ens = pipeline.ensemble;
    std::vector<std::vector<RhythmClass>> member_pred(ens.models.size());
    std::vector<RhythmClass> member_truth;
    std::vector<Eigen::VectorXd> beat_inputs_all, coeff_inputs_all;
    for (const auto& [id, entry] : labels) {
      auto rec = load_record(fs::path(data) / "records" / (id + ".csv"), kDefaultFs);
      if (entry.second == "train") {
        const auto seg = segment_record(rec, pipeline.featurizer.detector);
        auto bi = beat_inputs(seg.beats);
        auto ci = coefficient_inputs(seg.beats);
        beat_inputs_all.insert(beat_inputs_all.end(), bi.begin(), bi.end());
        coeff_inputs_all.insert(coeff_inputs_all.end(), ci.begin(), ci.end());
        continue;
      }
      if (entry.second != "test") continue;
      member_truth.push_back(entry.first);
      try {
        const auto p = prepare_record(segment_record(rec, pipeline.featurizer.detector), pipeline.featurizer);
        const auto outs = run_members(ens, p.features);
        for (std::size_t m = 0; m < outs.size(); ++m) member_pred[m].push_back(member_decision(ens, m, outs[m]));
      } catch (const Error&) {
        for (auto& mp : member_pred) mp.push_back(RhythmClass::Noisy);
      }
    }
    for (std::size_t m = 0; m < member_pred.size(); ++m) {
      b.members.emplace_back(ens.spec.members[m].id, evaluate_f1(member_pred[m], member_truth).average);
    }

    // Unseen single-pause Other records: corpus indices 8k+6 under another root seed.
    for (std::size_t k = 0; k < 60; ++k) {
      const auto s = synthesize_ecg(corpus_config(1000, 8 * k + 6, 0.05));
      const auto p = predict(s.record, pipeline);
      if (p.fallback || s.pause_beats.size() != 1) continue;
      const auto it = std::find_if(p.attention.begin(), p.attention.end(),
                                   [](const AttentionTrace& a) { return a.member_id == "Other-vs-rest-att"; });
      if (it == p.attention.end()) throw std::runtime_error("no Other-vs-rest-att member");
      const Eigen::Index pause_r = s.true_r_indices[s.pause_beats[0]];
      std::size_t nearest = 0;
      for (std::size_t t = 0; t < it->r_indices.size(); ++t) {
        if (std::abs(it->r_indices[t] - pause_r) < std::abs(it->r_indices[nearest] - pause_r)) nearest = t;
      }
      Eigen::Index argmax = 0;
      it->weights.maxCoeff(&argmax);
      ++b.attention_total;
      b.attention_hits += std::abs(argmax - static_cast<Eigen::Index>(nearest)) <= 1 ? 1 : 0;
    }

    b.sdae_first[0] = first_mse(fs::path(model) / "sdae_beats_loss.csv");
    b.sdae_first[1] = first_mse(fs::path(model) / "sdae_coeffs_loss.csv");
    b.sdae_final[0] = reconstruction_mse(pipeline.featurizer.sdae_beat, beat_inputs_all);
    b.sdae_final[1] = reconstruction_mse(pipeline.featurizer.sdae_coeff, coeff_inputs_all);
  } catch (const std::exception& e) {
    b.error = e.what();
  }
  return b;
}

Verdict end_to_end(const Benchmark& b) {
  if (!b.error.empty()) return {false, b.error};
  return {b.blender.average >= 0.90 && b.wall_s < 15 * 60,
          fmt::format("average F1 {:.4f} (N {:.3f}, AF {:.3f}, O {:.3f}) on 120 test records, pipeline {:.0f} s",
                      b.blender.average, b.blender.per_class[0], b.blender.per_class[1], b.blender.per_class[2],
                      b.wall_s)};
}

Verdict blender_value(const Benchmark& b) {
  if (!b.error.empty() || b.members.empty()) return {false, b.error};
  const auto best = *std::max_element(b.members.begin(), b.members.end(),
                                      [](const auto& x, const auto& y) { return x.second < y.second; });
  return {b.blender.average >= best.second - 0.02,
          fmt::format("blender {:.4f} vs best member {} {:.4f}", b.blender.average, best.first, best.second)};
}

Verdict attention_sanity(const Benchmark& b) {
  if (!b.error.empty() || b.attention_total == 0) return {false, b.error.empty() ? "no scorable records" : b.error};
  const double rate = static_cast<double>(b.attention_hits) / b.attention_total;
  return {rate >= 0.80, fmt::format("argmax within 1 beat of the pause in {}/{} records ({:.0f}%)", b.attention_hits,
                                    b.attention_total, 100 * rate)};
}

Verdict sdae_learning(const Benchmark& b) {
  if (!b.error.empty()) return {false, b.error};
  const bool ok = b.sdae_final[0] < 0.5 * b.sdae_first[0] && b.sdae_final[1] < 0.5 * b.sdae_first[1];
  return {ok, fmt::format("beats {:.4g} -> {:.4g}, coeffs {:.4g} -> {:.4g}", b.sdae_first[0], b.sdae_final[0],
                          b.sdae_first[1], b.sdae_final[1])};
}

// Two complete runs from scratch, with different worker counts, compared
// file by file. Manifests are skipped since they record wall-clock timings.
Verdict determinism(const Workspace& ws) {
  const auto cfg = ws / "det.json";
  std::ofstream(cfg) << R"({"seed": 21,
    "sdae": {"hidden": 32, "max_inputs": 600, "pretrain_epochs": 2, "finetune_epochs": 2},
    "level1": {"hidden": 8, "recurrent_layers": 2, "forward_layers": 2, "epochs": 2},
    "blender": {"epochs": 30}})";
  try {
    for (const char* run : {"det-a", "det-b"}) {
      const auto dir = ws / run;
      const auto data = (dir / "data").string(), model = (dir / "model").string();
      cli_or_throw({"synth", "--n", "40", "--out", data, "--config", cfg.string()});
      cli_or_throw({"train-sdae", "--data", data, "--model", model, "--config", cfg.string()});
      cli_or_throw({"train", "--data", data, "--model", model, "--config", cfg.string(), "--threads",
                    std::string(run) == "det-a" ? "1" : "3"});
      cli_or_throw({"blend", "--data", data, "--model", model, "--config", cfg.string()});
      cli_or_throw({"predict", "--model", model, "--data", data, "--split", "all", "--out", (dir / "out" / "pred.csv").string(),
                    "--attention-out", (dir / "out" / "att.csv").string()});
      cli_or_throw({"attention", "--model", model, "--record", (dir / "data" / "records" / "rec00002.csv").string(),
                    "--record", (dir / "data" / "records" / "rec00013.csv").string(), "--out",
                    (dir / "out" / "plots").string()});
    }
  } catch (const std::exception& e) {
    return {false, e.what()};
  }
  std::size_t compared = 0, differing = 0, svgs = 0;
  std::string first_diff;
  for (const auto& entry : fs::recursive_directory_iterator(ws / "det-a")) {
    if (!entry.is_regular_file() || entry.path().string().ends_with(".manifest.json")) continue;
    const auto rel = fs::relative(entry.path(), ws / "det-a");
    ++compared;
    svgs += rel.extension() == ".svg" ? 1 : 0;
    if (slurp(entry.path()) != slurp(ws / "det-b" / rel)) {
      ++differing;
      if (first_diff.empty()) first_diff = rel.string();
    }
  }
  return {differing == 0 && svgs > 0 && compared > 100,
          fmt::format("{} files compared ({} SVGs), {} differ{}", compared, svgs, differing,
                      first_diff.empty() ? "" : " starting with " + first_diff)};
}

}  // namespace

int main() {
  Workspace ws;
  int failures = 0;
  auto report = [&](int n, const char* name, const std::function<Verdict()>& fn) {
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, e.what()};
    }
    failures += v.pass ? 0 : 1;
    fmt::print("{} {:>2} {}: {} [{:.1f} s]\n", v.pass ? "PASS" : "FAIL", n, name, v.detail, seconds_since(t0));
    std::cout.flush();
  };

  report(1, "gradient integrity", gradient_integrity);
  report(2, "wavelet correctness", wavelet_correctness);
  report(3, "detector quality", detector_quality);
  report(4, "sequence reduction", sequence_reduction);
  report(5, "scoring arithmetic", scoring_arithmetic);
  Benchmark bench;
  report(6, "end-to-end benchmark", [&] {
    bench = run_benchmark(ws);
    return end_to_end(bench);
  });
  report(7, "blender value", [&] { return blender_value(bench); });
  report(8, "attention sanity", [&] { return attention_sanity(bench); });
  report(9, "determinism", [&] { return determinism(ws); });
  report(10, "SDAE learning", [&] { return sdae_learning(bench); });
  fmt::print("{} of 10 criteria passed\n", 10 - failures);
  return failures;
}

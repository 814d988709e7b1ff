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

#include "beatnet/signal_io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "beatnet/errors.hpp"
#include "beatnet/io_util.hpp"
#include "beatnet/random.hpp"

namespace beatnet {

std::string_view to_string(RhythmClass c) noexcept {
  switch (c) {
    case RhythmClass::Normal: return "Normal";
    case RhythmClass::AF: return "AF";
    case RhythmClass::Other: return "Other";
    case RhythmClass::Noisy: return "Noisy";
  }
  return "Normal";
}

RhythmClass rhythm_from_code(int value) {
  require(value >= 0 && value < kNumClasses, Errc::LabelOutOfRange,
          fmt::format("rhythm code {} outside 0..3", value));
  return static_cast<RhythmClass>(value);
}

RhythmClass parse_rhythm(std::string_view text) {
  text = io::trim(text);
  if (text == "Normal" || text == "N") return RhythmClass::Normal;
  if (text == "AF" || text == "A") return RhythmClass::AF;
  if (text == "Other" || text == "O") return RhythmClass::Other;
  if (text == "Noisy" || text == "~") return RhythmClass::Noisy;
  if (auto v = io::parse_int(text)) return rhythm_from_code(static_cast<int>(*v));
  fail(Errc::LabelOutOfRange, fmt::format("unknown rhythm label '{}'", text));
}

void EcgRecord::validate() const {
  require(fs > 0.0 && std::isfinite(fs), Errc::InvalidArgument, "sampling rate must be positive");
  require(samples.size() >= 1, Errc::EmptyRecord, "record '" + id + "' has no samples");
  require(samples.allFinite(), Errc::InvalidArgument, "record '" + id + "' has non-finite samples");
}

void SynthConfig::validate() const {
  require(duration_s > 0.0, Errc::InvalidConfig, "duration_s must be > 0");
  require(fs > 0.0, Errc::InvalidConfig, "fs must be > 0");
  require(rr_jitter >= 0.0 && rr_jitter < 1.0, Errc::InvalidConfig, "rr_jitter must lie in [0, 1)");
  require(mean_rr_s >= 0.3 && mean_rr_s <= 2.0, Errc::InvalidConfig, "mean_rr_s must lie in [0.3, 2.0]");
  require(noise_std >= 0.0, Errc::InvalidConfig, "noise_std must be >= 0");
  require(pause_period == 0 || pause_period >= 2, Errc::InvalidConfig, "pause_period must be 0 or >= 2");
}

EcgRecord load_record(const std::filesystem::path& path, double fs) {
  if (!std::filesystem::exists(path)) fail(Errc::MissingFile, path.string());
  const std::string text = io::read_file(path);

  std::vector<double> values;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line = io::trim(std::string_view(text).substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line == "sample") continue;
    auto v = io::parse_double(line);
    if (!v) {
      throw Error(Errc::ParseError,
                  fmt::format("{}:{}: not a number: '{}'", path.string(), line_no, line), line_no);
    }
    values.push_back(*v);
  }
  if (values.empty()) fail(Errc::EmptyRecord, path.string());

  EcgRecord record;
  record.id = path.stem().string();
  record.fs = fs;
  record.samples = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  record.validate();
  return record;
}

void save_record(const EcgRecord& record, const std::filesystem::path& path) {
  std::string out = "sample\n";
  out.reserve(static_cast<std::size_t>(record.size()) * 12);
  for (double v : record.samples) {
    out += io::format_double(v);
    out += '\n';
  }
  io::write_atomic(path, out);
}

EcgRecord normalize(const EcgRecord& record) {
  record.validate();
  const double mean = record.samples.mean();
  Eigen::VectorXd centered = record.samples.array() - mean;
  const double sd = std::sqrt(centered.squaredNorm() / static_cast<double>(centered.size()));
  if (!(sd > 1e-12)) {
    fail(Errc::ZeroVariance, fmt::format("record '{}' has std {:.3g} (flat or dead lead)", record.id, sd));
  }
  EcgRecord out = record;
  out.samples = centered / sd;
  return out;
}

namespace {

struct Wave {
  double amplitude;
  double offset_s;
  double sigma_s;
};

void add_gaussian(Eigen::VectorXd& x, double fs, double center, double amplitude, double sigma_s) {
  const double sigma = sigma_s * fs;
  const auto lo = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor(center - 5 * sigma)));
  const auto hi = std::min<Eigen::Index>(x.size() - 1, static_cast<Eigen::Index>(std::ceil(center + 5 * sigma)));
  for (Eigen::Index i = lo; i <= hi; ++i) {
    const double z = (static_cast<double>(i) - center) / sigma;
    x[i] += amplitude * std::exp(-0.5 * z * z);
  }
}

}  // namespace

SynthConfig corpus_config(std::uint64_t seed, std::size_t index, double noise_std) {
  SynthConfig c;
  c.seed = derive_seed(seed, static_cast<std::uint64_t>(index));
  c.rhythm = rhythm_from_code(static_cast<int>(index % kNumClasses));
  c.noise_std = noise_std;
  c.pause_period = (index / kNumClasses) % 2 == 0 ? 5 : 0;
  Rng rng(derive_seed(c.seed, "rate"));
  c.mean_rr_s = std::uniform_real_distribution<double>(0.75, 1.05)(rng);
  return c;
}

SynthResult synthesize_ecg(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double fs = config.fs;
  const auto n = std::max<Eigen::Index>(1, std::llround(config.duration_s * fs));
  const RhythmClass rhythm = config.rhythm;

  double jitter = config.rr_jitter;
  if (rhythm == RhythmClass::AF) {
    jitter = std::max(jitter, 0.15);
  } else {
    jitter = std::min(jitter, 0.03);
  }

  const auto base_step = std::llround(config.mean_rr_s * fs);
  const auto min_step = std::llround(0.3 * fs);
  const auto max_step = std::llround(2.5 * fs);

  // Beat positions.
  SynthResult result;
  const auto expected_beats = std::max<long long>(1, (n - base_step / 2) / base_step + 1);
  int phase = 0;
  long long single_pause_at = -1;
  if (rhythm == RhythmClass::Other) {
    if (config.pause_period > 0) {
      phase = static_cast<int>(unit(rng) * config.pause_period);
    } else {
      const long long lo = std::min<long long>(3, expected_beats - 1);
      const long long hi = std::max<long long>(lo, expected_beats - 4);
      single_pause_at = lo + static_cast<long long>(unit(rng) * static_cast<double>(hi - lo + 1));
    }
  }

  long long r = std::llround(0.5 * config.mean_rr_s * fs);
  long long beat = 0;
  bool after_pause = false;
  while (r < n) {
    if (after_pause) result.pause_beats.push_back(result.true_r_indices.size());
    result.true_r_indices.push_back(static_cast<Eigen::Index>(r));
    ++beat;
    long long step = base_step;
    if (jitter > 0.0) {
      step = std::llround(config.mean_rr_s * fs * (1.0 + jitter * gauss(rng)));
      step = std::clamp(step, min_step, max_step);
    }
    after_pause = false;
    if (rhythm == RhythmClass::Other) {
      const bool pause = config.pause_period > 0
                             ? (beat + phase) % config.pause_period == 0
                             : beat == single_pause_at;
      if (pause) {
        step += base_step;
        after_pause = true;
      }
    }
    r += step;
  }

  // Waveform.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  const bool has_p = rhythm != RhythmClass::AF;
  const Wave p{0.15, -0.16, 0.025};
  const Wave qrs[3] = {{-0.15, -0.035, 0.008}, {1.0, 0.0, 0.010}, {-0.30, 0.035, 0.008}};
  const Wave t{0.30, 0.25, 0.045};
  const double beat_scale = rhythm == RhythmClass::Noisy ? 0.15 : 1.0;
  for (auto ri : result.true_r_indices) {
    const double center = static_cast<double>(ri);
    const double scale = beat_scale * (1.0 + 0.05 * gauss(rng));
    if (has_p) add_gaussian(x, fs, center + p.offset_s * fs, scale * p.amplitude, p.sigma_s);
    for (const auto& w : qrs) add_gaussian(x, fs, center + w.offset_s * fs, scale * w.amplitude, w.sigma_s);
    add_gaussian(x, fs, center + t.offset_s * fs, scale * t.amplitude, t.sigma_s);
  }

  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (rhythm == RhythmClass::AF) {
    // Fibrillatory baseline: two low-amplitude 4-8 Hz oscillations.
    for (int k = 0; k < 2; ++k) {
      const double f = 4.0 + 4.0 * unit(rng);
      const double phi = two_pi * unit(rng);
      for (Eigen::Index i = 0; i < n; ++i) {
        x[i] += 0.04 * std::sin(two_pi * f * static_cast<double>(i) / fs + phi);
      }
    }
  }

  double noise_std = config.noise_std;
  if (rhythm == RhythmClass::Noisy) {
    noise_std = std::max(noise_std, 0.8);
    const double f = 0.15 + 0.35 * unit(rng);
    const double phi = two_pi * unit(rng);
    for (Eigen::Index i = 0; i < n; ++i) {
      x[i] += 0.6 * std::sin(two_pi * f * static_cast<double>(i) / fs + phi);
    }
  }
  if (noise_std > 0.0) {
    // Band-limited noise: white Gaussian smoothed by a Gaussian kernel with a
    // ~25 Hz corner, rescaled to unit variance.
    const double sigma = fs / (2.0 * std::numbers::pi * 25.0);
    const auto radius = static_cast<Eigen::Index>(std::ceil(4.0 * sigma));
    Eigen::VectorXd kernel(2 * radius + 1);
    for (Eigen::Index k = -radius; k <= radius; ++k) {
      const double z = static_cast<double>(k) / sigma;
      kernel[k + radius] = std::exp(-0.5 * z * z);
    }
    kernel /= kernel.norm();
    Eigen::VectorXd white(n + 2 * radius);
    for (Eigen::Index i = 0; i < white.size(); ++i) white[i] = gauss(rng);
    for (Eigen::Index i = 0; i < n; ++i) x[i] += noise_std * white.segment(i, kernel.size()).dot(kernel);
  }

  result.record.id = fmt::format("synth{}", config.seed);
  result.record.fs = fs;
  result.record.samples = std::move(x);
  result.record.label = rhythm;
  return result;
}

void save_indices(const std::vector<Eigen::Index>& indices, const std::filesystem::path& path) {
  std::string out;
  for (auto i : indices) out += fmt::format("{}\n", i);
  io::write_atomic(path, out);
}

std::vector<Eigen::Index> load_indices(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  std::vector<Eigen::Index> out;
  std::size_t line_no = 0;
  for (auto line : io::split(text, '\n')) {
    ++line_no;
    line = io::trim(line);
    if (line.empty()) continue;
    auto v = io::parse_int(line);
    if (!v) throw Error(Errc::ParseError, fmt::format("{}:{}: not an index", path.string(), line_no), line_no);
    out.push_back(static_cast<Eigen::Index>(*v));
  }
  return out;
}

}  // namespace beatnet

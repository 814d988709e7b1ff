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

#include "beatnet/segmentation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "beatnet/errors.hpp"

namespace beatnet {

void DetectorConfig::validate() const {
  require(integration_window_s > 0 && refractory_s > 0 && ma_window_s > 0 && search_radius_s > 0,
          Errc::InvalidConfig, "detector windows must be > 0");
  require(refractory_s >= 0.1, Errc::InvalidConfig, "refractory_s must be >= 0.1");
  require(min_peak_ratio >= 0 && min_peak_ratio < 1, Errc::InvalidConfig, "min_peak_ratio must lie in [0, 1)");
  require(threshold_scale > 0, Errc::InvalidConfig, "threshold_scale must be > 0");
}

Eigen::Index beat_half_width(double fs) {
  return static_cast<Eigen::Index>(std::floor(0.33 * fs + 1e-9));
}

namespace {

// Centred moving average with implicit zeros outside the record and a fixed
// divisor, so prepending zeros shifts the output exactly.
Eigen::VectorXd moving_average(const Eigen::VectorXd& x, Eigen::Index window) {
  const Eigen::Index n = x.size();
  const Eigen::Index before = window / 2;
  Eigen::VectorXd prefix(n + 1);
  prefix[0] = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index lo = std::clamp<Eigen::Index>(i - before, 0, n);
    const Eigen::Index hi = std::clamp<Eigen::Index>(i - before + window, 0, n);
    out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(window);
  }
  return out;
}

Eigen::Index samples_for(double seconds, double fs) {
  return std::max<Eigen::Index>(1, std::llround(seconds * fs));
}

}  // namespace

DetectorTrace detector_trace(const EcgRecord& record, const DetectorConfig& config) {
  config.validate();
  record.validate();
  const Eigen::VectorXd& x = record.samples;
  const Eigen::Index n = x.size();
  const Eigen::Index integration = samples_for(config.integration_window_s, record.fs);
  if (n < integration) {
    fail(Errc::RecordTooShort,
         fmt::format("record '{}' has {} samples, integration window needs {}", record.id, n, integration));
  }

  DetectorTrace trace;
  trace.derivative = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int k = 0; k < 5; ++k) {
      const Eigen::Index j = i + k - 2;
      if (j >= 0 && j < n) acc += config.deriv_kernel[static_cast<std::size_t>(k)] * x[j];
    }
    trace.derivative[i] = acc;
  }
  const Eigen::VectorXd squared = trace.derivative.array().square();
  trace.integrated = moving_average(squared, integration);
  trace.threshold = config.threshold_scale * moving_average(trace.integrated, samples_for(config.ma_window_s, record.fs));
  return trace;
}

std::vector<Eigen::Index> detect_r_peaks(const EcgRecord& record, const DetectorConfig& config) {
  const DetectorTrace trace = detector_trace(record, config);
  const Eigen::VectorXd& x = record.samples;
  const Eigen::Index n = x.size();
  const Eigen::Index radius = samples_for(config.search_radius_s, record.fs);
  const Eigen::Index refractory = samples_for(config.refractory_s, record.fs);

  // One candidate per contiguous supra-threshold run, snapped onto the
  // largest ECG sample near the run's energy maximum.
  std::vector<Eigen::Index> run_peaks;
  Eigen::Index i = 0;
  while (i < n) {
    if (!(trace.integrated[i] > trace.threshold[i])) {
      ++i;
      continue;
    }
    Eigen::Index peak = i;
    while (i < n && trace.integrated[i] > trace.threshold[i]) {
      if (trace.integrated[i] > trace.integrated[peak]) peak = i;
      ++i;
    }
    run_peaks.push_back(peak);
  }

  // Runs whose energy is far below the typical run are noise excursions.
  double floor = 0.0;
  if (config.min_peak_ratio > 0 && !run_peaks.empty()) {
    std::vector<double> energies;
    energies.reserve(run_peaks.size());
    for (auto p : run_peaks) energies.push_back(trace.integrated[p]);
    auto upper = energies.begin() + static_cast<std::ptrdiff_t>((3 * energies.size()) / 4);
    std::nth_element(energies.begin(), upper, energies.end());
    floor = config.min_peak_ratio * *upper;
  }

  std::vector<Eigen::Index> candidates;
  for (auto peak : run_peaks) {
    if (trace.integrated[peak] < floor) continue;
    const Eigen::Index lo = std::max<Eigen::Index>(0, peak - radius);
    const Eigen::Index hi = std::min<Eigen::Index>(n - 1, peak + radius);
    Eigen::Index best = lo;
    for (Eigen::Index j = lo + 1; j <= hi; ++j) {
      if (x[j] > x[best]) best = j;
    }
    candidates.push_back(best);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  std::vector<Eigen::Index> peaks;
  for (auto c : candidates) {
    if (!peaks.empty() && c - peaks.back() < refractory) {
      if (x[c] > x[peaks.back()]) peaks.back() = c;
      continue;
    }
    peaks.push_back(c);
  }
  return peaks;
}

BeatSequence segment_beats(const EcgRecord& record, const std::vector<Eigen::Index>& r_indices) {
  record.validate();
  if (r_indices.empty()) fail(Errc::NoBeats, fmt::format("record '{}' has no detected beats", record.id));
  const Eigen::Index n = record.size();
  for (std::size_t t = 0; t < r_indices.size(); ++t) {
    require(r_indices[t] >= 0 && r_indices[t] < n, Errc::InvalidArgument, "R index outside the record");
    require(t == 0 || r_indices[t] > r_indices[t - 1], Errc::InvalidArgument, "R indices must be ascending");
  }

  const Eigen::Index half = beat_half_width(record.fs);
  const Eigen::Index width = 2 * half + 1;
  const auto beats = static_cast<Eigen::Index>(r_indices.size());

  BeatSequence seq;
  seq.record_id = record.id;
  seq.fs = record.fs;
  seq.r_indices = r_indices;
  seq.windows = Eigen::MatrixXd::Zero(beats, width);
  for (Eigen::Index t = 0; t < beats; ++t) {
    const Eigen::Index start = r_indices[static_cast<std::size_t>(t)] - half;
    const Eigen::Index lo = std::max<Eigen::Index>(0, start);
    const Eigen::Index hi = std::min<Eigen::Index>(n, start + width);
    seq.windows.row(t).segment(lo - start, hi - lo) = record.samples.segment(lo, hi - lo).transpose();
  }

  seq.delta_rr.resize(beats);
  for (Eigen::Index t = 1; t < beats; ++t) {
    const auto gap = r_indices[static_cast<std::size_t>(t)] - r_indices[static_cast<std::size_t>(t - 1)];
    seq.delta_rr[t] = static_cast<double>(gap) / record.fs;
  }
  seq.delta_rr[0] = beats > 1 ? seq.delta_rr.tail(beats - 1).mean() : 1.0;
  return seq;
}

}  // namespace beatnet

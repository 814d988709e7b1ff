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

#include "beatnet/signal_io.hpp"

namespace beatnet {

// Modified Pan-Tompkins QRS detector settings. The adaptive threshold is a
// moving average of the integrated energy signal.
struct DetectorConfig {
  std::array<double, 5> deriv_kernel{-0.125, -0.25, 0.0, 0.25, 0.125};
  double integration_window_s = 0.150;
  double refractory_s = 0.200;
  double ma_window_s = 2.5;
  double threshold_scale = 1.0;
  // Half-width of the search used to snap a candidate onto the ECG maximum.
  double search_radius_s = 0.100;
  // Drop supra-threshold runs whose energy peak is below this fraction of
  // the record's upper-quartile run peak. 0 disables.
  double min_peak_ratio = 0.4;

  void validate() const;
};

// Ordered fixed-width beat windows centred on R-peaks.
struct BeatSequence {
  std::string record_id;
  double fs = kDefaultFs;
  std::vector<Eigen::Index> r_indices;
  Eigen::MatrixXd windows;  // T x W, one beat per row
  Eigen::VectorXd delta_rr; // seconds, length T

  Eigen::Index size() const noexcept { return windows.rows(); }
  Eigen::Index width() const noexcept { return windows.cols(); }
  Eigen::Index center() const noexcept { return windows.cols() / 2; }
};

// floor(0.33 * fs): half-width of the 0.66 s beat window.
Eigen::Index beat_half_width(double fs);
inline Eigen::Index beat_width(double fs) { return 2 * beat_half_width(fs) + 1; }

// Intermediate Pan-Tompkins streams, exposed for diagnostics and tests.
struct DetectorTrace {
  Eigen::VectorXd derivative;
  Eigen::VectorXd integrated;
  Eigen::VectorXd threshold;
};

DetectorTrace detector_trace(const EcgRecord& record, const DetectorConfig& config = {});

std::vector<Eigen::Index> detect_r_peaks(const EcgRecord& record, const DetectorConfig& config = {});

BeatSequence segment_beats(const EcgRecord& record, const std::vector<Eigen::Index>& r_indices);

}  // namespace beatnet

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

#include <string>
#include <vector>

namespace beatnet {

struct AttentionPlot {
  std::string title;
  double fs = 300.0;
  Eigen::VectorXd samples;
  std::vector<Eigen::Index> r_indices;
  Eigen::VectorXd weights;  // one a_t per entry of r_indices
};

// ECG strip on top, one attention bar per beat below it, aligned on the
// sample axis. Output depends only on the input values.
std::string render_attention_svg(const AttentionPlot& plot);

}  // namespace beatnet

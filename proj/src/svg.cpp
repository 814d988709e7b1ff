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

#include "beatnet/svg.hpp"

#include <fmt/format.h>

#include <algorithm>

#include "beatnet/errors.hpp"

namespace beatnet {

namespace {

constexpr double kWidth = 1200.0;
constexpr double kMargin = 40.0;
constexpr double kTraceTop = 40.0;
constexpr double kTraceHeight = 180.0;
constexpr double kBarsTop = 250.0;
constexpr double kBarsHeight = 100.0;
constexpr double kHeight = kBarsTop + kBarsHeight + 40.0;

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_attention_svg(const AttentionPlot& plot) {
  const auto n = plot.samples.size();
  require(n >= 2, Errc::InvalidArgument, "attention plot needs at least two samples");
  require(static_cast<Eigen::Index>(plot.r_indices.size()) == plot.weights.size(), Errc::ShapeMismatch,
          "one attention weight per beat required");
  const double plot_w = kWidth - 2 * kMargin;
  auto x_of = [&](double i) { return kMargin + plot_w * i / static_cast<double>(n - 1); };

  const double lo = plot.samples.minCoeff();
  const double hi = plot.samples.maxCoeff();
  const double span = hi - lo > 1e-12 ? hi - lo : 1.0;
  auto y_of = [&](double v) { return kTraceTop + kTraceHeight * (1.0 - (v - lo) / span); };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0:.0f}\" height=\"{1:.0f}\" "
      "viewBox=\"0 0 {0:.0f} {1:.0f}\">\n",
      kWidth, kHeight);
  svg += fmt::format("<rect width=\"{:.0f}\" height=\"{:.0f}\" fill=\"white\"/>\n", kWidth, kHeight);
  svg += fmt::format("<text x=\"{:.0f}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n", kMargin,
                     escape(plot.title));

  svg += "<polyline class=\"ecg\" fill=\"none\" stroke=\"black\" stroke-width=\"0.8\" points=\"";
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i) svg += ' ';
    svg += fmt::format("{:.2f},{:.2f}", x_of(static_cast<double>(i)), y_of(plot.samples[i]));
  }
  svg += "\"/>\n";

  // Bars are scaled to the largest weight so that flat attention still shows.
  const double amax = plot.weights.size() ? std::max(plot.weights.maxCoeff(), 1e-12) : 1.0;
  const double bar_w = std::max(2.0, 0.25 * plot.fs * plot_w / static_cast<double>(n));
  svg += "<g class=\"attention\" fill=\"steelblue\">\n";
  for (std::size_t t = 0; t < plot.r_indices.size(); ++t) {
    const double a = plot.weights[static_cast<Eigen::Index>(t)];
    const double h = kBarsHeight * a / amax;
    svg += fmt::format(
        "<rect class=\"attention-bar\" data-beat=\"{}\" data-a=\"{:.6f}\" x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" "
        "height=\"{:.2f}\"/>\n",
        t, a, x_of(static_cast<double>(plot.r_indices[t])) - bar_w / 2, kBarsTop + kBarsHeight - h, bar_w, h);
  }
  svg += "</g>\n";
  svg += fmt::format("<line x1=\"{:.0f}\" y1=\"{:.0f}\" x2=\"{:.0f}\" y2=\"{:.0f}\" stroke=\"gray\"/>\n", kMargin,
                     kBarsTop + kBarsHeight, kWidth - kMargin, kBarsTop + kBarsHeight);
  svg += fmt::format(
      "<text x=\"{:.0f}\" y=\"{:.0f}\" font-family=\"sans-serif\" font-size=\"12\">time (s), 0 to {:.2f}; bars: "
      "attention per beat</text>\n",
      kMargin, kHeight - 12, static_cast<double>(n - 1) / plot.fs);
  svg += "</svg>\n";
  return svg;
}

}  // namespace beatnet

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

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "beatnet/errors.hpp"

namespace beatnet {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr int kWaveletLevels = 5;

// Orthonormal Daubechies scaling filters (analysis low-pass, sum = sqrt 2).
template <typename Scalar>
VectorX<Scalar> scaling_filter(std::string_view name) {
  VectorX<Scalar> h;
  if (name == "haar" || name == "db1") {
    h.resize(2);
    h << Scalar(0.70710678118654752440L), Scalar(0.70710678118654752440L);
  } else if (name == "db2") {
    h.resize(4);
    h << Scalar(0.48296291314453414337L), Scalar(0.83651630373780790557L),
        Scalar(0.22414386804201338103L), Scalar(-0.12940952255126038117L);
  } else if (name == "db4") {
    h.resize(8);
    h << Scalar(0.23037781330889650086L), Scalar(0.71484657055291564709L),
        Scalar(0.63088076792985890788L), Scalar(-0.027983769416859854211L),
        Scalar(-0.18703481171909308408L), Scalar(0.030841381835560763627L),
        Scalar(0.032883011666885199735L), Scalar(-0.010597401785069032105L);
  } else {
    fail(Errc::InvalidArgument, "unknown wavelet '" + std::string(name) + "'");
  }
  return h;
}

// Quadrature mirror: g[n] = (-1)^n h[L-1-n].
template <typename Scalar>
VectorX<Scalar> wavelet_filter(const VectorX<Scalar>& h) {
  const Eigen::Index len = h.size();
  VectorX<Scalar> g(len);
  for (Eigen::Index n = 0; n < len; ++n) g[n] = (n % 2 == 0 ? Scalar(1) : Scalar(-1)) * h[len - 1 - n];
  return g;
}

template <typename Scalar>
struct WaveletDecomposition {
  std::vector<VectorX<Scalar>> detail;  // detail[0] = d1 (finest) ... detail[levels-1]
  VectorX<Scalar> approx;               // level-`levels` approximation
  std::string wavelet_name = "db4";
  int levels = kWaveletLevels;
  Eigen::Index input_length = 0;

  Eigen::Index coefficient_count() const {
    Eigen::Index n = approx.size();
    for (const auto& d : detail) n += d.size();
    return n;
  }

  // [a_L, d_L, ..., d_1]
  VectorX<Scalar> flatten() const {
    VectorX<Scalar> out(coefficient_count());
    Eigen::Index pos = 0;
    out.segment(pos, approx.size()) = approx;
    pos += approx.size();
    for (auto it = detail.rbegin(); it != detail.rend(); ++it) {
      out.segment(pos, it->size()) = *it;
      pos += it->size();
    }
    return out;
  }
};

// Length after zero-padding to a multiple of 2^levels.
inline Eigen::Index dwt_padded_length(Eigen::Index n, int levels) {
  const Eigen::Index block = Eigen::Index(1) << levels;
  return ((n + block - 1) / block) * block;
}

// One periodic analysis step: a[k] = sum_n h[n] x[(2k+n) mod N].
template <typename Scalar>
void dwt_step(const VectorX<Scalar>& x, const VectorX<Scalar>& lo, const VectorX<Scalar>& hi,
              VectorX<Scalar>& approx, VectorX<Scalar>& detail) {
  const Eigen::Index n = x.size();
  const Eigen::Index half = n / 2;
  approx.setZero(half);
  detail.setZero(half);
  for (Eigen::Index k = 0; k < half; ++k) {
    Scalar a(0), d(0);
    for (Eigen::Index t = 0; t < lo.size(); ++t) {
      const Scalar v = x[(2 * k + t) % n];
      a += lo[t] * v;
      d += hi[t] * v;
    }
    approx[k] = a;
    detail[k] = d;
  }
}

// Mallat cascade with periodic extension. Inputs whose length is not a
// multiple of 2^levels are zero-padded first, which leaves the signal energy
// unchanged.
template <typename Derived>
WaveletDecomposition<typename Derived::Scalar> dwt(const Eigen::MatrixBase<Derived>& signal,
                                                   std::string_view wavelet = "db4",
                                                   int levels = kWaveletLevels) {
  using Scalar = typename Derived::Scalar;
  const VectorX<Scalar> lo = scaling_filter<Scalar>(wavelet);
  const VectorX<Scalar> hi = wavelet_filter(lo);
  require(levels >= 1, Errc::InvalidArgument, "levels must be >= 1");
  require(signal.size() >= lo.size(), Errc::SignalTooShort, "signal shorter than the wavelet filter");

  WaveletDecomposition<Scalar> out;
  out.wavelet_name = std::string(wavelet);
  out.levels = levels;
  out.input_length = signal.size();

  VectorX<Scalar> current = VectorX<Scalar>::Zero(dwt_padded_length(signal.size(), levels));
  current.head(signal.size()) = signal.reshaped();
  out.detail.resize(static_cast<std::size_t>(levels));
  for (int level = 0; level < levels; ++level) {
    VectorX<Scalar> approx;
    dwt_step(current, lo, hi, approx, out.detail[static_cast<std::size_t>(level)]);
    current = std::move(approx);
  }
  out.approx = std::move(current);
  return out;
}

template <typename Scalar>
struct WaveletEnergies {
  VectorX<Scalar> band_energy;  // E1..E_L over detail bands
  Scalar twe{0};
  VectorX<Scalar> rwe;
  Scalar we{0};
};

// RWE_i = E_i / TWE over the given band energies; WE = Shannon entropy (nats)
// of RWE. TWE < 1e-12 means no spectral shape: RWE is uniform and WE maximal.
template <typename Scalar>
WaveletEnergies<Scalar> energies_from_bands(const VectorX<Scalar>& band_energy) {
  const Eigen::Index bands = band_energy.size();
  require(bands >= 1, Errc::InvalidArgument, "no energy bands");
  require((band_energy.array() >= Scalar(0)).all(), Errc::InvalidArgument, "band energies must be >= 0");
  WaveletEnergies<Scalar> out;
  out.band_energy = band_energy;
  out.twe = band_energy.sum();
  using std::log;
  if (out.twe < Scalar(1e-12)) {
    out.rwe = VectorX<Scalar>::Constant(bands, Scalar(1) / Scalar(bands));
    out.we = log(Scalar(bands));
    return out;
  }
  out.rwe = band_energy / out.twe;
  Scalar we(0);
  for (Eigen::Index i = 0; i < bands; ++i) {
    const Scalar p = out.rwe[i];
    if (p > Scalar(0)) we -= p * log(p);
  }
  out.we = std::clamp(we, Scalar(0), Scalar(log(Scalar(bands))));
  return out;
}

// Energies of the detail bands d1..d_L; the approximation band is left out.
template <typename Scalar>
WaveletEnergies<Scalar> wavelet_energies(const WaveletDecomposition<Scalar>& decomp) {
  const auto bands = static_cast<Eigen::Index>(decomp.detail.size());
  require(bands >= 1, Errc::InvalidArgument, "decomposition has no detail bands");
  VectorX<Scalar> e(bands);
  for (Eigen::Index i = 0; i < bands; ++i) e[i] = decomp.detail[static_cast<std::size_t>(i)].squaredNorm();
  return energies_from_bands(e);
}

}  // namespace beatnet

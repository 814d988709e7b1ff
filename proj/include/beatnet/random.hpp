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
#include <random>
#include <string_view>

namespace beatnet {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Per-stage substream: splitmix64(root XOR fnv1a64(tag)). Every random
// consumer in the pipeline derives its seed from the run seed this way.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag) noexcept {
  return splitmix64(root ^ fnv1a64(tag));
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) noexcept {
  return splitmix64(root ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

}  // namespace beatnet

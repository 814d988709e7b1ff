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

#include <doctest.h>
#include <fmt/format.h>

#include <Eigen/Core>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <unistd.h>
#include <string>

#include "beatnet/errors.hpp"
#include "beatnet/random.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            fmt::format("beatnet-test-{}-{}", ::getpid(), counter++);
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Eigen::VectorXd random_vector(Eigen::Index n, beatnet::Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, beatnet::Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

}  // namespace testing

// Checks that `expr` throws beatnet::Error with the given code.
#define CHECK_ERRC(expr, errc)                                                                      \
  do {                                                                                              \
    bool thrown_ = false;                                                                           \
    try {                                                                                           \
      (void)(expr);                                                                                 \
    } catch (const beatnet::Error& e_) {                                                            \
      thrown_ = true;                                                                               \
      CHECK_MESSAGE(e_.code() == (errc), "got " << beatnet::errc_name(e_.code()) << ": " << e_.what()); \
    }                                                                                               \
    CHECK_MESSAGE(thrown_, "expected " << beatnet::errc_name(errc));                                \
  } while (0)

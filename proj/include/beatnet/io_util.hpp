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
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace beatnet::io {

// Writes to "<path>.tmp" then renames over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view text);
std::optional<double> parse_double(std::string_view token);
std::optional<long long> parse_int(std::string_view token);

// Shortest representation that round-trips exactly.
std::string format_double(double value);

// Little-endian binary helpers for the model file formats.
class BinaryWriter {
 public:
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void f64(double v);
  void bytes(std::string_view b);
  const std::string& data() const noexcept { return buf_; }

 private:
  std::string buf_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::string data) : buf_(std::move(data)) {}
  std::uint16_t u16();
  std::uint32_t u32();
  double f64();
  std::string bytes(std::size_t n);
  std::size_t remaining() const noexcept { return buf_.size() - pos_; }

 private:
  void need(std::size_t n) const;
  std::string buf_;
  std::size_t pos_ = 0;
};

}  // namespace beatnet::io

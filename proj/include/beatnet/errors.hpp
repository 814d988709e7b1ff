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

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace beatnet {

enum class Errc {
  MissingFile,
  ParseError,
  EmptyRecord,
  ZeroVariance,
  InvalidConfig,
  InvalidArgument,
  RecordTooShort,
  NoBeats,
  SignalTooShort,
  WindowTooShort,
  InsufficientData,
  DimensionMismatch,
  EmptySequence,
  ShapeMismatch,
  EmptyClass,
  LabelOutOfRange,
  EmptyDataset,
  NonFiniteLoss,
  LeakageDetected,
  LengthMismatch,
  InvalidModelFile,
  Io,
};

std::string_view errc_name(Errc code) noexcept;

// Single exception type for every library failure; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message,
        std::optional<std::size_t> line = std::nullopt);

  Errc code() const noexcept { return code_; }
  // 1-based line number for ParseError.
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  Errc code_;
  std::optional<std::size_t> line_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, Errc code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace beatnet

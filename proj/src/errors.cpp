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

#include "beatnet/errors.hpp"

namespace beatnet {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MissingFile: return "MissingFile";
    case Errc::ParseError: return "ParseError";
    case Errc::EmptyRecord: return "EmptyRecord";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::RecordTooShort: return "RecordTooShort";
    case Errc::NoBeats: return "NoBeats";
    case Errc::SignalTooShort: return "SignalTooShort";
    case Errc::WindowTooShort: return "WindowTooShort";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptySequence: return "EmptySequence";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptyClass: return "EmptyClass";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::LeakageDetected: return "LeakageDetected";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::InvalidModelFile: return "InvalidModelFile";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message, std::optional<std::size_t> line)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message),
      code_(code),
      line_(line) {}

}  // namespace beatnet

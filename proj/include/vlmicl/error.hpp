// Copyright 2026 The vlmicl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vlmicl {

/// Failure categories shared by the C++ core, the C API and the CLI. The
/// string form is what the CLI prints, so it must stay stable.
enum class ErrorCategory {
  kStructural,
  kTaskArity,
  kSampling,
  kCapacity,
  kUnsupportedLayout,
  kComposition,
  kRender,
  kTransport,
  kCredential,
  kPayload,
  kHarness,
  kScoring,
  kDegenerate,
  kIntegrity,
  kConfig,
  kPlanning,
  kIo,
  kInvalidArgument,
};

std::string_view category_name(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

/// Transport failure that carries the last HTTP status seen (0 when the
/// request never produced a response, e.g. a timeout).
class TransportError : public Error {
 public:
  TransportError(int last_status, int attempts, const std::string& message)
      : Error(ErrorCategory::kTransport, message),
        last_status_(last_status),
        attempts_(attempts) {}

  int last_status() const noexcept { return last_status_; }
  int attempts() const noexcept { return attempts_; }

 private:
  int last_status_;
  int attempts_;
};

}  // namespace vlmicl

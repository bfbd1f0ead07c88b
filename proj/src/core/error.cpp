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

#include "vlmicl/error.hpp"

namespace vlmicl {

std::string_view category_name(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kStructural: return "structural";
    case ErrorCategory::kTaskArity: return "task-arity";
    case ErrorCategory::kSampling: return "sampling";
    case ErrorCategory::kCapacity: return "capacity";
    case ErrorCategory::kUnsupportedLayout: return "unsupported-layout";
    case ErrorCategory::kComposition: return "composition";
    case ErrorCategory::kRender: return "render";
    case ErrorCategory::kTransport: return "transport";
    case ErrorCategory::kCredential: return "credential";
    case ErrorCategory::kPayload: return "payload";
    case ErrorCategory::kHarness: return "harness";
    case ErrorCategory::kScoring: return "scoring";
    case ErrorCategory::kDegenerate: return "degenerate-input";
    case ErrorCategory::kIntegrity: return "integrity";
    case ErrorCategory::kConfig: return "config";
    case ErrorCategory::kPlanning: return "planning";
    case ErrorCategory::kIo: return "io";
    case ErrorCategory::kInvalidArgument: return "invalid-argument";
  }
  return "unknown";
}

}  // namespace vlmicl

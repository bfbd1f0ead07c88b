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

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "vlmicl/dataset.hpp"
#include "vlmicl/parser.hpp"

namespace vlmicl {

enum class AbstentionPolicy { kCountAsError, kExclude };

std::string_view policy_name(AbstentionPolicy policy);
std::optional<AbstentionPolicy> parse_policy(std::string_view text);

/// Counts relative to a designated positive class. `excluded` counts items
/// left out under AbstentionPolicy::kExclude and is not part of the total.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;
  std::uint64_t excluded = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
  /// The same counts seen from the other class.
  ConfusionMatrix swapped() const noexcept { return {tn, fn, fp, tp, excluded}; }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Exact fraction; 0/0 reads as 0.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 0;

  double value() const noexcept {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  }
  /// Half-up rounding at two decimals, in integer hundredths.
  std::uint64_t hundredths() const noexcept { return den == 0 ? 0 : (200 * num + den) / (2 * den); }
  /// Two-decimal half-up view as a double.
  double rounded() const noexcept { return static_cast<double>(hundredths()) / 100.0; }
  /// "0.83"
  std::string rounded_text() const;

  friend bool operator==(const Ratio&, const Ratio&) = default;
};

struct ClassMetrics {
  std::string label;
  Ratio precision;
  Ratio recall;
  Ratio f1;
};

struct MetricsReport {
  std::size_t positive_index = 0;
  std::array<ClassMetrics, 2> classes;  // in task order
  Ratio accuracy;
  ConfusionMatrix matrix;  // relative to classes[positive_index]

  std::uint64_t scored() const noexcept { return matrix.total(); }
  std::uint64_t excluded() const noexcept { return matrix.excluded; }
  const ClassMetrics& positive() const { return classes[positive_index]; }
  const ClassMetrics& negative() const { return classes[1 - positive_index]; }

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
  friend bool operator==(const MetricsReport& a, const MetricsReport& b);
};

/// Tallies predictions against ground truth. Predictions that did not parse
/// count as misclassifications of their true class, or are excluded.
/// Throws Error(kScoring) for an item without ground truth or a predicted
/// label outside the task.
ConfusionMatrix confusion(std::span<const Prediction> predictions,
                          const std::map<std::string, ClassLabel>& truths, const Task& task,
                          std::size_t positive_index = 0,
                          AbstentionPolicy policy = AbstentionPolicy::kCountAsError);

/// Precision, recall and F1 per class plus accuracy. Throws
/// Error(kDegenerate) on an all-zero matrix.
MetricsReport report(const ConfusionMatrix& matrix, const Task& task,
                     std::size_t positive_index = 0);

}  // namespace vlmicl

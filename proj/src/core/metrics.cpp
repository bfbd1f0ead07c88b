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

#include "vlmicl/metrics.hpp"

#include <cstdio>

#include "vlmicl/error.hpp"
#include "text_util.hpp"

namespace vlmicl {

std::string_view policy_name(AbstentionPolicy policy) {
  return policy == AbstentionPolicy::kCountAsError ? "count_as_error" : "exclude";
}

std::optional<AbstentionPolicy> parse_policy(std::string_view text) {
  const std::string t = replace_all(to_lower(trim(text)), "-", "_");
  if (t == "count_as_error") return AbstentionPolicy::kCountAsError;
  if (t == "exclude") return AbstentionPolicy::kExclude;
  return std::nullopt;
}

std::string Ratio::rounded_text() const {
  const auto h = hundredths();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%llu.%02llu", static_cast<unsigned long long>(h / 100),
                static_cast<unsigned long long>(h % 100));
  return buf;
}

ConfusionMatrix confusion(std::span<const Prediction> predictions,
                          const std::map<std::string, ClassLabel>& truths, const Task& task,
                          std::size_t positive_index, AbstentionPolicy policy) {
  if (positive_index > 1) throw Error(ErrorCategory::kInvalidArgument, "positive index must be 0 or 1");
  ConfusionMatrix m;
  for (const auto& p : predictions) {
    const auto it = truths.find(p.item_id);
    if (it == truths.end()) {
      throw Error(ErrorCategory::kScoring, "no ground truth for item '" + p.item_id + "'");
    }
    const auto truth = task.index_of(it->second.name());
    if (!truth) {
      throw Error(ErrorCategory::kScoring, "ground truth of '" + p.item_id + "' is outside the task");
    }
    const bool truth_positive = *truth == positive_index;
    bool predicted_positive;
    if (p.status == ParseStatus::kParsed && p.predicted) {
      const auto pred = task.index_of(p.predicted->name());
      if (!pred) {
        throw Error(ErrorCategory::kScoring, "prediction for '" + p.item_id +
                                                 "' is outside the task: " + p.predicted->name());
      }
      predicted_positive = *pred == positive_index;
    } else if (policy == AbstentionPolicy::kExclude) {
      ++m.excluded;
      continue;
    } else {
      predicted_positive = !truth_positive;
    }
    if (truth_positive) {
      ++(predicted_positive ? m.tp : m.fn);
    } else {
      ++(predicted_positive ? m.fp : m.tn);
    }
  }
  return m;
}

namespace {

ClassMetrics class_metrics(std::string label, const ConfusionMatrix& m) {
  ClassMetrics c;
  c.label = std::move(label);
  c.precision = {m.tp, m.tp + m.fp};
  c.recall = {m.tp, m.tp + m.fn};
  // Harmonic mean of precision and recall, in closed form; 0 when tp == 0.
  c.f1 = {2 * m.tp, 2 * m.tp + m.fp + m.fn};
  return c;
}

nlohmann::json ratio_json(const Ratio& r) {
  return {{"num", r.num}, {"den", r.den}, {"value", r.value()}, {"rounded", r.rounded_text()}};
}

Ratio ratio_from(const nlohmann::json& j) {
  return {j.at("num").get<std::uint64_t>(), j.at("den").get<std::uint64_t>()};
}

}  // namespace

MetricsReport report(const ConfusionMatrix& matrix, const Task& task, std::size_t positive_index) {
  if (positive_index > 1) throw Error(ErrorCategory::kInvalidArgument, "positive index must be 0 or 1");
  if (matrix.total() == 0) {
    throw Error(ErrorCategory::kDegenerate, "confusion matrix has no scored items");
  }
  MetricsReport r;
  r.positive_index = positive_index;
  r.matrix = matrix;
  r.classes[positive_index] = class_metrics(task[positive_index].name(), matrix);
  r.classes[1 - positive_index] = class_metrics(task[1 - positive_index].name(), matrix.swapped());
  r.accuracy = {matrix.tp + matrix.tn, matrix.total()};
  return r;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  j["positive"] = classes[positive_index].label;
  j["matrix"] = {{"tp", matrix.tp}, {"fp", matrix.fp}, {"fn", matrix.fn}, {"tn", matrix.tn}};
  j["scored"] = scored();
  j["excluded"] = excluded();
  j["accuracy"] = ratio_json(accuracy);
  j["classes"] = nlohmann::json::array();
  for (const auto& c : classes) {
    j["classes"].push_back({{"label", c.label},
                            {"precision", ratio_json(c.precision)},
                            {"recall", ratio_json(c.recall)},
                            {"f1", ratio_json(c.f1)}});
  }
  return j;
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  const auto& m = j.at("matrix");
  r.matrix = {m.at("tp").get<std::uint64_t>(), m.at("fp").get<std::uint64_t>(),
              m.at("fn").get<std::uint64_t>(), m.at("tn").get<std::uint64_t>(),
              j.at("excluded").get<std::uint64_t>()};
  r.accuracy = ratio_from(j.at("accuracy"));
  const auto& classes = j.at("classes");
  if (!classes.is_array() || classes.size() != 2) {
    throw Error(ErrorCategory::kIntegrity, "metrics must list two classes");
  }
  const std::string positive = j.at("positive").get<std::string>();
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& c = classes[i];
    r.classes[i] = {c.at("label").get<std::string>(), ratio_from(c.at("precision")),
                    ratio_from(c.at("recall")), ratio_from(c.at("f1"))};
    if (r.classes[i].label == positive) r.positive_index = i;
  }
  return r;
}

bool operator==(const MetricsReport& a, const MetricsReport& b) {
  if (a.positive_index != b.positive_index || !(a.matrix == b.matrix) ||
      !(a.accuracy == b.accuracy)) {
    return false;
  }
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& x = a.classes[i];
    const auto& y = b.classes[i];
    if (x.label != y.label || !(x.precision == y.precision) || !(x.recall == y.recall) ||
        !(x.f1 == y.f1)) {
      return false;
    }
  }
  return true;
}

}  // namespace vlmicl

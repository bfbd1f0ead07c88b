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
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace vlmicl {

enum class Split { kTrain, kTest };

std::string_view split_name(Split split);
std::optional<Split> parse_split(std::string_view text);

/// A class name. Equality is case-insensitive on the trimmed text; the
/// original spelling (trimmed) is kept for display.
class ClassLabel {
 public:
  explicit ClassLabel(std::string_view name);

  const std::string& name() const noexcept { return name_; }
  bool matches(std::string_view text) const;

  friend bool operator==(const ClassLabel& a, const ClassLabel& b) { return a.matches(b.name_); }

 private:
  std::string name_;
};

/// The ordered class pair of a binary task. Index 0 is the positive class
/// for metrics unless configured otherwise.
class Task {
 public:
  Task(ClassLabel first, ClassLabel second);

  const ClassLabel& operator[](std::size_t index) const { return labels_.at(index); }
  const ClassLabel& first() const noexcept { return labels_[0]; }
  const ClassLabel& second() const noexcept { return labels_[1]; }
  std::optional<std::size_t> index_of(std::string_view name) const;

 private:
  std::array<ClassLabel, 2> labels_;
};

struct LabeledImage {
  std::string id;  // "<split>/<class dir>/<filename>"
  std::filesystem::path path;
  ClassLabel label;
  Split split;
  int width = 0;
  int height = 0;
  std::string content_digest;
};

struct LoadWarning {
  std::string path;
  std::string reason;
};

class Dataset {
 public:
  Dataset(std::filesystem::path root, Task task, std::vector<LabeledImage> items,
          std::vector<LoadWarning> warnings);

  const std::filesystem::path& root() const noexcept { return root_; }
  const Task& task() const noexcept { return task_; }
  std::span<const LabeledImage> items() const noexcept { return items_; }
  std::span<const LoadWarning> warnings() const noexcept { return warnings_; }

  std::size_t count(Split split, std::size_t class_index) const;
  std::size_t count(Split split) const;

  /// Items of one split (and optionally one class), in id order.
  std::vector<LabeledImage> select(Split split) const;
  std::vector<LabeledImage> select(Split split, std::size_t class_index) const;
  const LabeledImage* find(std::string_view id) const;

 private:
  std::filesystem::path root_;
  Task task_;
  std::vector<LabeledImage> items_;
  std::vector<LoadWarning> warnings_;
  std::array<std::array<std::size_t, 2>, 2> counts_{};
};

struct LoadOptions {
  /// Overrides the lexical class order; names must match the directory names
  /// case-insensitively.
  std::optional<std::array<std::string, 2>> class_order;
};

/// Reads `<root>/{train,test}/<class>/*.{png,jpg,jpeg}`. Undecodable files are
/// dropped and reported as warnings.
Dataset load_dataset(const std::filesystem::path& root, const LoadOptions& options = {});

struct SplitSummary {
  Split split;
  std::array<std::size_t, 2> per_class{};
  std::size_t total = 0;
  double balance_ratio = 0.0;  // min/max class count, 0 when a class is empty
  bool balance_flagged = false;
};

struct ValidationReport {
  std::array<std::string, 2> classes;
  std::vector<SplitSummary> splits;
  int min_width = 0;
  int min_height = 0;
  int max_width = 0;
  int max_height = 0;
  bool counts_consistent = true;
  std::vector<std::string> duplicate_ids;
  std::vector<std::vector<std::string>> duplicate_content;
  std::vector<LoadWarning> warnings;

  std::string to_text() const;
  nlohmann::json to_json() const;
};

/// Ratio below which a split is flagged as imbalanced.
inline constexpr double kBalanceFlagThreshold = 0.5;

ValidationReport validate(const Dataset& dataset);

/// Draws k items of each class from `split`: all of class 0 first, then all of
/// class 1. Deterministic in (dataset, split, k, seed).
std::vector<LabeledImage> stratified_sample(const Dataset& dataset, Split split,
                                            std::size_t k_per_class, std::uint64_t seed);

}  // namespace vlmicl

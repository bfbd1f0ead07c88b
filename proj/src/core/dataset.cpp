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

#include "vlmicl/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <map>
#include <sstream>

#include "vlmicl/digest.hpp"
#include "vlmicl/error.hpp"
#include "vlmicl/image.hpp"
#include "vlmicl/random.hpp"
#include "text_util.hpp"

namespace vlmicl {

namespace fs = std::filesystem;

std::string_view split_name(Split split) {
  return split == Split::kTrain ? "train" : "test";
}

std::optional<Split> parse_split(std::string_view text) {
  const std::string t = to_lower(trim(text));
  if (t == "train") return Split::kTrain;
  if (t == "test") return Split::kTest;
  return std::nullopt;
}

ClassLabel::ClassLabel(std::string_view name) : name_(trim(name)) {
  if (name_.empty()) throw Error(ErrorCategory::kInvalidArgument, "class label must be non-empty");
}

bool ClassLabel::matches(std::string_view text) const {
  return iequals(name_, trim(text));
}

Task::Task(ClassLabel first, ClassLabel second) : labels_{std::move(first), std::move(second)} {
  if (labels_[0] == labels_[1]) {
    throw Error(ErrorCategory::kTaskArity,
                "task classes must be distinct, got '" + labels_[0].name() + "' twice");
  }
}

std::optional<std::size_t> Task::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < 2; ++i) {
    if (labels_[i].matches(name)) return i;
  }
  return std::nullopt;
}

Dataset::Dataset(fs::path root, Task task, std::vector<LabeledImage> items,
                 std::vector<LoadWarning> warnings)
    : root_(std::move(root)),
      task_(std::move(task)),
      items_(std::move(items)),
      warnings_(std::move(warnings)) {
  std::sort(items_.begin(), items_.end(),
            [](const LabeledImage& a, const LabeledImage& b) { return a.id < b.id; });
  for (const auto& item : items_) {
    const auto idx = task_.index_of(item.label.name());
    if (!idx) {
      throw Error(ErrorCategory::kTaskArity,
                  "item " + item.id + " has label outside the task: " + item.label.name());
    }
    ++counts_[static_cast<std::size_t>(item.split)][*idx];
  }
}

std::size_t Dataset::count(Split split, std::size_t class_index) const {
  return counts_.at(static_cast<std::size_t>(split)).at(class_index);
}

std::size_t Dataset::count(Split split) const { return count(split, 0) + count(split, 1); }

std::vector<LabeledImage> Dataset::select(Split split) const {
  std::vector<LabeledImage> out;
  for (const auto& item : items_) {
    if (item.split == split) out.push_back(item);
  }
  return out;
}

std::vector<LabeledImage> Dataset::select(Split split, std::size_t class_index) const {
  std::vector<LabeledImage> out;
  for (const auto& item : items_) {
    if (item.split == split && item.label == task_[class_index]) out.push_back(item);
  }
  return out;
}

const LabeledImage* Dataset::find(std::string_view id) const {
  auto it = std::lower_bound(items_.begin(), items_.end(), id,
                             [](const LabeledImage& a, std::string_view key) { return a.id < key; });
  if (it != items_.end() && it->id == id) return &*it;
  return nullptr;
}

namespace {

bool is_image_file(const fs::path& path) {
  const std::string ext = to_lower(path.extension().string());
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<std::string> class_directories(const fs::path& split_dir) {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(split_dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_directory() && !name.empty() && name[0] != '.') names.push_back(name);
  }
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace

Dataset load_dataset(const fs::path& root, const LoadOptions& options) {
  if (!fs::is_directory(root)) {
    throw Error(ErrorCategory::kStructural, "dataset root is not a directory: " + root.string());
  }
  std::array<std::vector<std::string>, 2> dirs;
  for (Split split : {Split::kTrain, Split::kTest}) {
    const fs::path split_dir = root / std::string(split_name(split));
    if (!fs::is_directory(split_dir)) {
      throw Error(ErrorCategory::kStructural,
                  "missing split directory: " + split_dir.string());
    }
    auto names = class_directories(split_dir);
    if (names.size() != 2) {
      throw Error(ErrorCategory::kTaskArity,
                  "split '" + std::string(split_name(split)) + "' has " +
                      std::to_string(names.size()) + " class directories, expected 2");
    }
    dirs[static_cast<std::size_t>(split)] = std::move(names);
  }
  const auto& train_dirs = dirs[0];
  const auto& test_dirs = dirs[1];
  for (const auto& name : train_dirs) {
    const bool found = std::any_of(test_dirs.begin(), test_dirs.end(),
                                   [&](const std::string& t) { return iequals(t, name); });
    if (!found) {
      throw Error(ErrorCategory::kStructural,
                  "class '" + name + "' present in train but not in test");
    }
  }

  std::array<std::string, 2> order = {train_dirs[0], train_dirs[1]};
  if (options.class_order) {
    for (const auto& wanted : *options.class_order) {
      const bool found = std::any_of(train_dirs.begin(), train_dirs.end(),
                                     [&](const std::string& d) { return iequals(d, wanted); });
      if (!found) {
        throw Error(ErrorCategory::kConfig,
                    "configured class '" + wanted + "' has no directory under " + root.string());
      }
    }
    order = {trim((*options.class_order)[0]), trim((*options.class_order)[1])};
  }
  Task task{ClassLabel(order[0]), ClassLabel(order[1])};

  std::vector<LabeledImage> items;
  std::vector<LoadWarning> warnings;
  for (Split split : {Split::kTrain, Split::kTest}) {
    for (const auto& class_dir : dirs[static_cast<std::size_t>(split)]) {
      const fs::path dir = root / std::string(split_name(split)) / class_dir;
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& file : files) {
        const std::string id = std::string(split_name(split)) + "/" + class_dir + "/" +
                               file.filename().string();
        try {
          const Bytes bytes = read_file(file);
          if (bytes.empty()) throw Error(ErrorCategory::kIo, "empty file");
          const Bitmap bitmap = decode_image(bytes);
          items.push_back(LabeledImage{id, file, ClassLabel(class_dir), split, bitmap.width(),
                                       bitmap.height(), content_digest(bytes)});
        } catch (const Error& e) {
          warnings.push_back({id, e.what()});
        }
      }
    }
  }
  return Dataset(root, std::move(task), std::move(items), std::move(warnings));
}

ValidationReport validate(const Dataset& dataset) {
  ValidationReport report;
  report.classes = {dataset.task().first().name(), dataset.task().second().name()};
  std::array<std::array<std::size_t, 2>, 2> recount{};
  bool any = false;
  std::map<std::string, std::size_t> id_counts;
  std::map<std::string, std::vector<std::string>> by_content;
  for (const auto& item : dataset.items()) {
    if (auto idx = dataset.task().index_of(item.label.name())) {
      ++recount[static_cast<std::size_t>(item.split)][*idx];
    }
    if (!any) {
      report.min_width = report.max_width = item.width;
      report.min_height = report.max_height = item.height;
      any = true;
    } else {
      report.min_width = std::min(report.min_width, item.width);
      report.max_width = std::max(report.max_width, item.width);
      report.min_height = std::min(report.min_height, item.height);
      report.max_height = std::max(report.max_height, item.height);
    }
    ++id_counts[item.id];
    by_content[item.content_digest].push_back(item.id);
  }
  for (Split split : {Split::kTrain, Split::kTest}) {
    SplitSummary s;
    s.split = split;
    for (std::size_t c = 0; c < 2; ++c) {
      s.per_class[c] = dataset.count(split, c);
      if (s.per_class[c] != recount[static_cast<std::size_t>(split)][c]) {
        report.counts_consistent = false;
      }
    }
    s.total = s.per_class[0] + s.per_class[1];
    const auto lo = std::min(s.per_class[0], s.per_class[1]);
    const auto hi = std::max(s.per_class[0], s.per_class[1]);
    s.balance_ratio = hi == 0 ? 0.0 : static_cast<double>(lo) / static_cast<double>(hi);
    s.balance_flagged = s.balance_ratio < kBalanceFlagThreshold;
    report.splits.push_back(s);
  }
  for (const auto& [id, n] : id_counts) {
    if (n > 1) report.duplicate_ids.push_back(id);
  }
  for (auto& [digest, ids] : by_content) {
    if (ids.size() > 1) report.duplicate_content.push_back(ids);
  }
  report.warnings.assign(dataset.warnings().begin(), dataset.warnings().end());
  return report;
}

std::string ValidationReport::to_text() const {
  std::ostringstream out;
  out << "classes: " << classes[0] << ", " << classes[1] << "\n";
  for (const auto& s : splits) {
    out << "split " << split_name(s.split) << ": " << classes[0] << "=" << s.per_class[0] << " "
        << classes[1] << "=" << s.per_class[1] << " total=" << s.total << " balance="
        << std::fixed << std::setprecision(3) << s.balance_ratio
        << (s.balance_flagged ? " (imbalanced)" : "") << "\n";
  }
  out << "image size: min " << min_width << "x" << min_height << ", max " << max_width << "x"
      << max_height << "\n";
  out << "counts consistent: " << (counts_consistent ? "yes" : "no") << "\n";
  out << "duplicate ids: " << duplicate_ids.size() << "\n";
  for (const auto& id : duplicate_ids) out << "  " << id << "\n";
  out << "duplicate content groups: " << duplicate_content.size() << "\n";
  for (const auto& group : duplicate_content) {
    out << " ";
    for (const auto& id : group) out << " " << id;
    out << "\n";
  }
  out << "warnings: " << warnings.size() << "\n";
  for (const auto& w : warnings) out << "  " << w.path << ": " << w.reason << "\n";
  return out.str();
}

nlohmann::json ValidationReport::to_json() const {
  nlohmann::json j;
  j["classes"] = classes;
  j["splits"] = nlohmann::json::array();
  for (const auto& s : splits) {
    j["splits"].push_back({{"split", split_name(s.split)},
                           {"per_class", s.per_class},
                           {"total", s.total},
                           {"balance_ratio", s.balance_ratio},
                           {"balance_flagged", s.balance_flagged}});
  }
  j["min_size"] = {min_width, min_height};
  j["max_size"] = {max_width, max_height};
  j["counts_consistent"] = counts_consistent;
  j["duplicate_ids"] = duplicate_ids;
  j["duplicate_content"] = duplicate_content;
  j["warnings"] = nlohmann::json::array();
  for (const auto& w : warnings) j["warnings"].push_back({{"path", w.path}, {"reason", w.reason}});
  return j;
}

std::vector<LabeledImage> stratified_sample(const Dataset& dataset, Split split,
                                            std::size_t k_per_class, std::uint64_t seed) {
  std::string shortfall;
  for (std::size_t c = 0; c < 2; ++c) {
    const std::size_t have = dataset.count(split, c);
    if (have < k_per_class) {
      if (!shortfall.empty()) shortfall += "; ";
      shortfall += "class '" + dataset.task()[c].name() + "' has " + std::to_string(have) +
                   " items, short by " + std::to_string(k_per_class - have);
    }
  }
  if (!shortfall.empty()) {
    throw Error(ErrorCategory::kSampling, "cannot draw " + std::to_string(k_per_class) +
                                              " per class from " +
                                              std::string(split_name(split)) + ": " + shortfall);
  }
  SeededRng rng(seed);
  std::vector<LabeledImage> out;
  out.reserve(2 * k_per_class);
  for (std::size_t c = 0; c < 2; ++c) {
    auto pool = dataset.select(split, c);
    // Partial Fisher-Yates: the first k slots become the sample, in draw order.
    for (std::size_t i = 0; i < k_per_class; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
  }
  return out;
}

}  // namespace vlmicl

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

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vlmicl/dataset.hpp"
#include "vlmicl/prompts.hpp"

namespace vlmicl {

enum class ParseStatus { kParsed, kAbstained, kUnparseable, kAmbiguous };

std::string_view status_name(ParseStatus status);
std::optional<ParseStatus> parse_status(std::string_view text);

struct Prediction {
  std::string item_id;
  int group = 1;
  int index = 0;
  std::optional<ClassLabel> predicted;  // set iff status == kParsed
  ParseStatus status = ParseStatus::kUnparseable;
  std::string explanation;
  std::string matched_line;  // verbatim line from the response

  nlohmann::json to_json() const;
  static Prediction from_json(const nlohmann::json& j);
};

/// Lowercase alias -> class index. The class names themselves always match
/// and need not be listed.
class SynonymTable {
 public:
  SynonymTable() = default;

  /// `aliases` maps alias text to a class name of `task`. Throws
  /// Error(kConfig) when an alias names an unknown class or would match both
  /// classes.
  SynonymTable(const Task& task, const std::map<std::string, std::string>& aliases);

  /// covid, covid-19, positive -> the COVID class; normal, healthy, negative ->
  /// the Normal class. Empty when the task is not a COVID/Normal pair.
  static SynonymTable defaults(const Task& task);

  const std::map<std::string, std::size_t>& aliases() const noexcept { return aliases_; }
  nlohmann::json to_json(const Task& task) const;
  static SynonymTable from_json(const Task& task, const nlohmann::json& j);

  friend bool operator==(const SynonymTable&, const SynonymTable&) = default;

 private:
  std::map<std::string, std::size_t> aliases_;
};

/// Line-oriented label extraction. For each expected query (in order) the
/// response is scanned top-down for an unconsumed line holding "Image <index>"
/// followed by a class mention or, when exactly one query is expected, a line
/// that starts with a class mention (optionally after list markers and a
/// "Label:"-style key). A line naming both classes, or negating one ("not
/// COVID"), is ambiguous. Queries with no matching line are abstained when the
/// response reads as a refusal, unparseable otherwise. Never throws on
/// response content.
std::vector<Prediction> parse_labels(std::string_view raw, std::span<const QueryRef> expected,
                                     const Task& task, const SynonymTable& synonyms);

/// True when the text reads as a refusal to answer.
bool looks_like_refusal(std::string_view raw);

}  // namespace vlmicl

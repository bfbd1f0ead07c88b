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

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "vlmicl/composer.hpp"
#include "vlmicl/dataset.hpp"
#include "vlmicl/image.hpp"

namespace vlmicl {

enum class StrategyKind { kNaive, kIcl1, kIcl2, kIcl3, kIcl4, kIclR1, kIclR2 };

/// Canonical lowercase names: naive, icl1 .. icl4, icl-r1, icl-r2.
std::string_view strategy_name(StrategyKind kind);
/// Accepts the canonical names, any case, with '_' or '-' before "r".
std::optional<StrategyKind> parse_strategy(std::string_view text);
std::span<const StrategyKind> all_strategies();

/// Observation phrase used by the reasoning strategies when none is
/// configured. Not taken from any published prompt.
inline constexpr std::string_view kDefaultReasoningText = "visible opacities in the lung fields";

struct Strategy {
  StrategyKind kind = StrategyKind::kNaive;
  int shots_per_class = 0;
  int queries_per_request = 1;
  bool combine_into_figure = false;
  std::optional<std::string> reasoning_text;

  /// Builds the canonical arities for `kind`. A shots override is accepted
  /// only for the nine-cell grid strategies (ICL4, ICL-R2) and must leave room
  /// for the queries in a 3x3 grid.
  static Strategy make(StrategyKind kind, std::optional<std::string> reasoning_text = std::nullopt,
                       std::optional<int> shots_override = std::nullopt);

  bool uses_reasoning() const noexcept {
    return kind == StrategyKind::kIclR1 || kind == StrategyKind::kIclR2;
  }
  /// ICL3 sends one composed figure per query; everything else groups all
  /// queries of a request into the same prompt-visible numbering.
  bool one_figure_per_query() const noexcept { return kind == StrategyKind::kIcl3; }
};

/// Stored template for `kind`, byte-identical to templates/<name>.txt.
std::string_view template_text(StrategyKind kind);
/// File stem of the golden template ("naive", "icl_r1", ...).
std::string_view template_file_stem(StrategyKind kind);

struct TextPart {
  std::string text;
};

struct ImageAttachment {
  std::string source_id;  // dataset item id, or "figure-<n>"
  MediaType media_type = MediaType::kPng;
  Bytes data;
  std::string digest;
};

using ContentPart = std::variant<TextPart, ImageAttachment>;

struct Message {
  std::string role;
  std::vector<ContentPart> parts;
};

/// A query as the model sees it. `group` is the 1-based figure number (always 1
/// except for ICL3); `index` is the "Image N" number inside that group.
struct QueryRef {
  int group = 1;
  int index = 0;
  std::string item_id;
};

struct PromptPackage {
  std::vector<Message> messages;
  std::vector<QueryRef> queries;
  /// Stable identity of the request within a run ("plan-<n>"); lets scripted
  /// providers answer by request instead of by arrival order.
  std::string request_key;

  std::string text() const;
  std::vector<std::string> attachment_digests() const;
  std::size_t attachment_count() const;
};

using AttachmentLoader = std::function<Bytes(const LabeledImage&)>;

/// Renders one request. Examples must be ordered class-0 block then class-1
/// block; `figures` must be given exactly when the strategy combines images
/// (one per query for ICL3, one otherwise). A short final group (fewer
/// queries than queries_per_request) is allowed. Throws Error(kRender) on any
/// arity or consistency violation.
PromptPackage render_prompt(const Strategy& strategy, const Task& task,
                            std::span<const LabeledImage> examples,
                            std::span<const LabeledImage> queries,
                            std::span<const ComposedFigure> figures = {},
                            const AttachmentLoader& loader = {});

/// "image 7", "image 7 and image 8", "image 7, image 8 and image 9".
std::string enumerate_images(std::span<const int> indices, bool capitalize = false);

}  // namespace vlmicl

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

#include "vlmicl/prompts.hpp"

#include <array>
#include <map>

#include "vlmicl/digest.hpp"
#include "vlmicl/error.hpp"
#include "text_util.hpp"

namespace vlmicl {

namespace detail {
extern const char kTemplate_naive[];
extern const std::size_t kTemplate_naive_size;
extern const char kTemplate_icl1[];
extern const std::size_t kTemplate_icl1_size;
extern const char kTemplate_icl2[];
extern const std::size_t kTemplate_icl2_size;
extern const char kTemplate_icl3[];
extern const std::size_t kTemplate_icl3_size;
extern const char kTemplate_icl4[];
extern const std::size_t kTemplate_icl4_size;
extern const char kTemplate_icl_r1[];
extern const std::size_t kTemplate_icl_r1_size;
extern const char kTemplate_icl_r2[];
extern const std::size_t kTemplate_icl_r2_size;
}  // namespace detail

namespace {

constexpr std::array<StrategyKind, 7> kAllStrategies = {
    StrategyKind::kNaive, StrategyKind::kIcl1,  StrategyKind::kIcl2,  StrategyKind::kIcl3,
    StrategyKind::kIcl4,  StrategyKind::kIclR1, StrategyKind::kIclR2,
};

[[noreturn]] void render_error(const std::string& message) {
  throw Error(ErrorCategory::kRender, message);
}

std::string image_range(int first, int last) {
  if (first == last) return "image " + std::to_string(first);
  return "image " + std::to_string(first) + "-" + std::to_string(last);
}

std::string substitute(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size() + 256);
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const std::size_t open = tmpl.find("${", pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    const std::size_t close = tmpl.find('}', open);
    if (close == std::string_view::npos) render_error("unterminated placeholder in template");
    out.append(tmpl.substr(pos, open - pos));
    const std::string key(tmpl.substr(open + 2, close - open - 2));
    const auto it = values.find(key);
    if (it == values.end()) render_error("template placeholder '" + key + "' has no value");
    out.append(it->second);
    pos = close + 1;
  }
  return out;
}

}  // namespace

std::string_view strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kNaive: return "naive";
    case StrategyKind::kIcl1: return "icl1";
    case StrategyKind::kIcl2: return "icl2";
    case StrategyKind::kIcl3: return "icl3";
    case StrategyKind::kIcl4: return "icl4";
    case StrategyKind::kIclR1: return "icl-r1";
    case StrategyKind::kIclR2: return "icl-r2";
  }
  return "unknown";
}

std::optional<StrategyKind> parse_strategy(std::string_view text) {
  const std::string wanted = replace_all(to_lower(trim(text)), "_", "-");
  for (StrategyKind kind : kAllStrategies) {
    if (strategy_name(kind) == wanted) return kind;
  }
  return std::nullopt;
}

std::span<const StrategyKind> all_strategies() { return kAllStrategies; }

Strategy Strategy::make(StrategyKind kind, std::optional<std::string> reasoning_text,
                        std::optional<int> shots_override) {
  Strategy s;
  s.kind = kind;
  switch (kind) {
    case StrategyKind::kNaive:
      s.shots_per_class = 0;
      s.queries_per_request = 1;
      s.combine_into_figure = false;
      break;
    case StrategyKind::kIcl1:
    case StrategyKind::kIclR1:
      s.shots_per_class = 1;
      s.queries_per_request = 1;
      s.combine_into_figure = false;
      break;
    case StrategyKind::kIcl2:
      s.shots_per_class = 1;
      s.queries_per_request = 1;
      s.combine_into_figure = true;
      break;
    case StrategyKind::kIcl3:
      s.shots_per_class = 1;
      s.queries_per_request = 3;
      s.combine_into_figure = true;
      break;
    case StrategyKind::kIcl4:
    case StrategyKind::kIclR2:
      s.shots_per_class = 3;
      s.queries_per_request = 3;
      s.combine_into_figure = true;
      break;
  }
  if (shots_override && *shots_override != s.shots_per_class) {
    const bool grid = kind == StrategyKind::kIcl4 || kind == StrategyKind::kIclR2;
    if (!grid) {
      throw Error(ErrorCategory::kConfig, "strategy " + std::string(strategy_name(kind)) +
                                              " has a fixed shot count of " +
                                              std::to_string(s.shots_per_class));
    }
    if (*shots_override < 1 || 2 * *shots_override + s.queries_per_request > kMaxGridImages) {
      throw Error(ErrorCategory::kConfig,
                  "shots per class must be in [1, 3] for " + std::string(strategy_name(kind)));
    }
    s.shots_per_class = *shots_override;
  }
  if (s.uses_reasoning()) {
    s.reasoning_text = reasoning_text ? std::move(reasoning_text)
                                      : std::optional<std::string>(kDefaultReasoningText);
  } else if (reasoning_text) {
    throw Error(ErrorCategory::kConfig, "reasoning text only applies to icl-r1 and icl-r2");
  }
  return s;
}

std::string_view template_text(StrategyKind kind) {
  using namespace detail;
  switch (kind) {
    case StrategyKind::kNaive: return {kTemplate_naive, kTemplate_naive_size};
    case StrategyKind::kIcl1: return {kTemplate_icl1, kTemplate_icl1_size};
    case StrategyKind::kIcl2: return {kTemplate_icl2, kTemplate_icl2_size};
    case StrategyKind::kIcl3: return {kTemplate_icl3, kTemplate_icl3_size};
    case StrategyKind::kIcl4: return {kTemplate_icl4, kTemplate_icl4_size};
    case StrategyKind::kIclR1: return {kTemplate_icl_r1, kTemplate_icl_r1_size};
    case StrategyKind::kIclR2: return {kTemplate_icl_r2, kTemplate_icl_r2_size};
  }
  return {};
}

std::string_view template_file_stem(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kNaive: return "naive";
    case StrategyKind::kIcl1: return "icl1";
    case StrategyKind::kIcl2: return "icl2";
    case StrategyKind::kIcl3: return "icl3";
    case StrategyKind::kIcl4: return "icl4";
    case StrategyKind::kIclR1: return "icl_r1";
    case StrategyKind::kIclR2: return "icl_r2";
  }
  return {};
}

std::string PromptPackage::text() const {
  std::string out;
  for (const auto& message : messages) {
    for (const auto& part : message.parts) {
      if (const auto* t = std::get_if<TextPart>(&part)) {
        if (!out.empty()) out += "\n";
        out += t->text;
      }
    }
  }
  return out;
}

std::vector<std::string> PromptPackage::attachment_digests() const {
  std::vector<std::string> out;
  for (const auto& message : messages) {
    for (const auto& part : message.parts) {
      if (const auto* a = std::get_if<ImageAttachment>(&part)) out.push_back(a->digest);
    }
  }
  return out;
}

std::size_t PromptPackage::attachment_count() const { return attachment_digests().size(); }

std::string enumerate_images(std::span<const int> indices, bool capitalize) {
  const std::string word = capitalize ? "Image " : "image ";
  std::string out;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (i > 0) out += (i + 1 == indices.size()) ? " and " : ", ";
    out += word + std::to_string(indices[i]);
  }
  return out;
}

PromptPackage render_prompt(const Strategy& strategy, const Task& task,
                            std::span<const LabeledImage> examples,
                            std::span<const LabeledImage> queries,
                            std::span<const ComposedFigure> figures,
                            const AttachmentLoader& loader) {
  const std::string name(strategy_name(strategy.kind));
  const auto shots = static_cast<std::size_t>(strategy.shots_per_class);
  if (examples.size() != 2 * shots) {
    render_error(name + " needs " + std::to_string(2 * shots) + " examples, got " +
                 std::to_string(examples.size()));
  }
  if (queries.empty() || queries.size() > static_cast<std::size_t>(strategy.queries_per_request)) {
    render_error(name + " takes 1.." + std::to_string(strategy.queries_per_request) +
                 " queries per request, got " + std::to_string(queries.size()));
  }
  if (strategy.uses_reasoning() && (!strategy.reasoning_text || strategy.reasoning_text->empty())) {
    render_error(name + " requires reasoning text");
  }
  if (!strategy.uses_reasoning() && strategy.reasoning_text) {
    render_error(name + " does not take reasoning text");
  }
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const std::size_t want = i < shots ? 0 : 1;
    if (!(examples[i].label == task[want])) {
      render_error("example " + std::to_string(i + 1) + " (" + examples[i].id +
                   ") should be labeled " + task[want].name());
    }
  }

  const std::size_t expected_figures =
      !strategy.combine_into_figure ? 0 : (strategy.one_figure_per_query() ? queries.size() : 1);
  if (figures.size() != expected_figures) {
    render_error(name + " expects " + std::to_string(expected_figures) + " composed figure(s), got " +
                 std::to_string(figures.size()));
  }
  // Figures must show exactly the examples followed by their queries.
  for (std::size_t f = 0; f < figures.size(); ++f) {
    std::vector<std::string> want;
    for (const auto& e : examples) want.push_back(e.id);
    if (strategy.one_figure_per_query()) {
      want.push_back(queries[f].id);
    } else {
      for (const auto& q : queries) want.push_back(q.id);
    }
    const auto& placements = figures[f].placements;
    bool ok = placements.size() == want.size();
    for (std::size_t i = 0; ok && i < want.size(); ++i) {
      ok = placements[i].source_id == want[i] && placements[i].index == static_cast<int>(i + 1);
    }
    if (!ok) render_error("figure " + std::to_string(f + 1) + " does not match examples/queries");
  }

  PromptPackage package;
  const int first_query = static_cast<int>(2 * shots) + 1;
  std::vector<int> query_indices;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    if (strategy.one_figure_per_query()) {
      package.queries.push_back({static_cast<int>(q) + 1, first_query, queries[q].id});
    } else {
      package.queries.push_back({1, first_query + static_cast<int>(q), queries[q].id});
      query_indices.push_back(first_query + static_cast<int>(q));
    }
  }
  if (strategy.one_figure_per_query()) query_indices.push_back(first_query);

  std::string examples_block;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (i > 0) examples_block += "\n";
    examples_block += "Image " + std::to_string(i + 1) + ": " + task[i < shots ? 0 : 1].name();
  }
  const int n_shots = static_cast<int>(shots);
  std::map<std::string, std::string> values = {
      {"class1", task.first().name()},
      {"class2", task.second().name()},
      {"examples", examples_block},
      {"queries", enumerate_images(query_indices)},
      {"Queries", enumerate_images(query_indices, true)},
      {"groups", std::to_string(queries.size())},
      {"reasoning", strategy.reasoning_text.value_or("")},
      {"class1_images", n_shots > 0 ? image_range(1, n_shots) : ""},
      {"class2_images", n_shots > 0 ? image_range(n_shots + 1, 2 * n_shots) : ""},
  };
  std::string text = substitute(template_text(strategy.kind), values);
  while (!text.empty() && (text.back() == '\n' || text.back() == ' ')) text.pop_back();

  Message message{"user", {}};
  if (strategy.combine_into_figure) {
    for (std::size_t f = 0; f < figures.size(); ++f) {
      message.parts.emplace_back(ImageAttachment{"figure-" + std::to_string(f + 1),
                                                 MediaType::kPng, figures[f].png, figures[f].digest});
    }
  } else {
    const AttachmentLoader load =
        loader ? loader : [](const LabeledImage& item) { return read_file(item.path); };
    auto attach = [&](const LabeledImage& item) {
      Bytes data = load(item);
      const auto type = sniff_media_type(data);
      if (!type) render_error("attachment " + item.id + " is not PNG or JPEG");
      std::string digest = content_digest(data);
      message.parts.emplace_back(ImageAttachment{item.id, *type, std::move(data), std::move(digest)});
    };
    for (const auto& e : examples) attach(e);
    for (const auto& q : queries) attach(q);
  }
  message.parts.emplace_back(TextPart{std::move(text)});
  package.messages.push_back(std::move(message));
  return package;
}

}  // namespace vlmicl

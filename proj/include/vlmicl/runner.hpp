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
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vlmicl/dataset.hpp"
#include "vlmicl/metrics.hpp"
#include "vlmicl/parser.hpp"
#include "vlmicl/prompts.hpp"
#include "vlmicl/provider.hpp"

namespace vlmicl {

enum class ShotMode { kFixed, kResamplePerRequest };

struct RunConfig {
  std::filesystem::path dataset_root;
  StrategyKind strategy = StrategyKind::kNaive;
  std::uint64_t seed = 0;
  std::optional<int> shots_per_class;
  ShotMode shot_mode = ShotMode::kFixed;
  std::optional<std::filesystem::path> provider_config;
  std::optional<std::filesystem::path> mock_script;
  AbstentionPolicy abstention = AbstentionPolicy::kCountAsError;
  std::filesystem::path output_dir;
  std::optional<std::size_t> limit;
  std::optional<std::string> reasoning_text;
  std::optional<std::array<std::string, 2>> class_order;
  std::optional<std::string> positive_class;
  std::optional<std::map<std::string, std::string>> synonyms;
  int concurrency = 0;  // 0: 1 for mock runs, otherwise derived from the rate limit

  /// Everything that determines the run's content. The output directory is
  /// left out so identical runs in different directories match.
  nlohmann::json snapshot() const;
};

/// Sets one option from text, as used by the C API and the CLI. Keys:
/// dataset, strategy, seed, shots, resample_per_request, provider_config,
/// mock_script, abstention_policy, out, limit, reasoning_text, class_order
/// ("A,B"), positive_class, synonyms (JSON object), concurrency.
void set_run_option(RunConfig& config, std::string_view key, std::string_view value);

struct RequestPlan {
  std::size_t plan_index = 0;
  std::vector<LabeledImage> examples;  // class-0 block then class-1 block
  std::vector<LabeledImage> queries;
  std::uint64_t shot_seed = 0;

  std::string request_key() const { return "plan-" + std::to_string(plan_index); }
};

/// Test items are shuffled once with the run seed, truncated to `limit`, and
/// split into groups of the strategy's queries_per_request (last group may be
/// short). Shots come from the train split only.
std::vector<RequestPlan> plan_requests(const RunConfig& config, const Dataset& dataset);

struct RunOptions {
  /// Stop after this many request records have been written by this call,
  /// leaving the manifest without a summary (simulates an interruption).
  std::optional<std::size_t> stop_after_records;
};

struct RunResult {
  std::filesystem::path manifest_path;
  bool completed = false;
  std::size_t requests_sent = 0;     // by this call
  std::size_t requests_resumed = 0;  // already present in the manifest
  std::optional<MetricsReport> metrics;
};

inline constexpr std::string_view kManifestFileName = "manifest.jsonl";
inline constexpr std::string_view kManifestFormat = "vlmicl-manifest/1";

/// Executes every plan, appending one JSON line per request in plan order,
/// then a summary line with the scored metrics. An existing manifest for the
/// same configuration is resumed: its request records are kept and never
/// re-sent. Transport failures mark the affected items unparseable.
RunResult run_experiment(const RunConfig& config, Provider& provider,
                         const RunOptions& options = {});

/// Same, with the provider the config names (mock script or live endpoint).
RunResult run_experiment(const RunConfig& config, const RunOptions& options = {});

struct ScoreResult {
  MetricsReport report;
  std::optional<MetricsReport> embedded;
  bool parser_config_changed = false;
  bool matches_embedded = false;
  std::size_t parsed_count = 0;
};

/// Re-parses every recorded raw response and re-scores offline. A synonyms
/// override changes the parser configuration relative to the manifest.
/// Throws Error(kIntegrity) naming the first bad record.
ScoreResult score_manifest(const std::filesystem::path& manifest,
                           const std::optional<std::map<std::string, std::string>>& synonyms = {});

/// Scores `item_id,true_label,predicted_label` CSV files. Without a class
/// order the two labels are taken in lexical order; the first is positive.
MetricsReport score_predictions_csv(const std::filesystem::path& csv,
                                    const std::optional<std::array<std::string, 2>>& class_order = {});

inline constexpr std::string_view kSummaryCsvHeader =
    "strategy,seed,tp,fp,fn,tn,p_pos,r_pos,f1_pos,p_neg,r_neg,f1_neg,accuracy,scored,excluded";

/// One row per manifest, plus a "mean" row per strategy that has several
/// runs (counts summed, metrics averaged over runs).
std::string summary_csv(std::span<const std::filesystem::path> manifests);

/// Removes the "volatile" members (timestamps, latencies, request ids,
/// completion order) from every record.
std::string strip_volatile(std::string_view manifest_text);

/// Default observation text and planner notes recorded in every header.
std::vector<std::string> deviation_notes(StrategyKind kind);

}  // namespace vlmicl

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

#include "vlmicl/runner.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "vlmicl/composer.hpp"
#include "vlmicl/digest.hpp"
#include "vlmicl/error.hpp"
#include "vlmicl/random.hpp"
#include "text_util.hpp"

namespace vlmicl {

namespace fs = std::filesystem;

namespace {

// Stream id for the test-order shuffle; request shot seeds use the plan index.
constexpr std::uint64_t kTestOrderStream = 0xfeedULL;

[[noreturn]] void config_error(const std::string& message) {
  throw Error(ErrorCategory::kConfig, message);
}

std::uint64_t parse_u64(std::string_view key, std::string_view value) {
  std::uint64_t out = 0;
  const std::string v = trim(value);
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    config_error("option " + std::string(key) + " expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  const std::string v = to_lower(trim(value));
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  config_error("option " + std::string(key) + " expects a boolean, got '" + v + "'");
}

std::array<std::string, 2> parse_pair(std::string_view key, std::string_view value) {
  const std::string v(value);
  const auto comma = v.find(',');
  if (comma == std::string::npos || v.find(',', comma + 1) != std::string::npos) {
    config_error("option " + std::string(key) + " expects two comma-separated names");
  }
  std::array<std::string, 2> out = {trim(v.substr(0, comma)), trim(v.substr(comma + 1))};
  if (out[0].empty() || out[1].empty()) config_error("option " + std::string(key) + " has an empty name");
  return out;
}

nlohmann::json read_json_file(const fs::path& path, ErrorCategory category) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::kIo, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(category, path.string() + ": " + e.what());
  }
}

std::size_t positive_index_for(const RunConfig& config, const Task& task) {
  if (!config.positive_class) return 0;
  const auto idx = task.index_of(*config.positive_class);
  if (!idx) config_error("positive class '" + *config.positive_class + "' is not in the task");
  return *idx;
}

SynonymTable synonyms_for(const RunConfig& config, const Task& task) {
  return config.synonyms ? SynonymTable(task, *config.synonyms) : SynonymTable::defaults(task);
}

Strategy strategy_for(const RunConfig& config) {
  return Strategy::make(config.strategy,
                        (config.strategy == StrategyKind::kIclR1 ||
                         config.strategy == StrategyKind::kIclR2)
                            ? config.reasoning_text
                            : std::nullopt,
                        config.shots_per_class);
}

// ---------------------------------------------------------------------------
// Manifest I/O

struct ManifestLines {
  std::vector<nlohmann::json> records;
  std::size_t valid_bytes = 0;  // length of the prefix made of complete lines
  bool torn_tail = false;
};

/// Strict reader: every newline-terminated line must be a JSON object. A final
/// line without '\n' is reported as a torn tail and not parsed.
ManifestLines read_manifest_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::kIo, "cannot open " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ManifestLines out;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < content.size()) {
    const std::size_t nl = content.find('\n', start);
    if (nl == std::string::npos) {
      out.torn_tail = true;
      break;
    }
    ++line_no;
    auto j = nlohmann::json::parse(content.substr(start, nl - start), nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("kind")) {
      throw Error(ErrorCategory::kIntegrity,
                  path.string() + ": line " + std::to_string(line_no) + " is not a manifest record");
    }
    out.records.push_back(std::move(j));
    start = nl + 1;
    out.valid_bytes = start;
  }
  return out;
}

void require_fields(const nlohmann::json& record, std::size_t line_no,
                    std::initializer_list<const char*> fields) {
  for (const char* f : fields) {
    if (!record.contains(f)) {
      std::string where = "line " + std::to_string(line_no);
      if (record.contains("plan_index")) where += " (plan " + record["plan_index"].dump() + ")";
      throw Error(ErrorCategory::kIntegrity,
                  "manifest record at " + where + " is missing '" + f + "'");
    }
  }
}

nlohmann::json query_json(const QueryRef& q, const ClassLabel& truth) {
  return {{"group", q.group}, {"index", q.index}, {"item_id", q.item_id}, {"truth", truth.name()}};
}

struct ParsedRecord {
  std::size_t plan_index;
  std::vector<QueryRef> queries;
  std::map<std::string, ClassLabel> truths;
  std::string raw_response;
};

ParsedRecord parse_request_record(const nlohmann::json& r, std::size_t line_no) {
  require_fields(r, line_no,
                 {"plan_index", "queries", "prompt_text", "attachments", "raw_response", "predictions"});
  ParsedRecord out;
  try {
    out.plan_index = r.at("plan_index").get<std::size_t>();
    out.raw_response = r.at("raw_response").get<std::string>();
    for (const auto& q : r.at("queries")) {
      QueryRef ref{q.at("group").get<int>(), q.at("index").get<int>(),
                   q.at("item_id").get<std::string>()};
      out.truths.emplace(ref.item_id, ClassLabel(q.at("truth").get<std::string>()));
      out.queries.push_back(std::move(ref));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::kIntegrity,
                "manifest record at line " + std::to_string(line_no) + ": " + e.what());
  }
  if (out.queries.empty()) {
    throw Error(ErrorCategory::kIntegrity,
                "manifest record at line " + std::to_string(line_no) + " has no queries");
  }
  return out;
}

class ManifestWriter {
 public:
  explicit ManifestWriter(const fs::path& path) : out_(path, std::ios::binary | std::ios::app) {
    if (!out_) throw Error(ErrorCategory::kIo, "cannot append to " + path.string());
  }
  void append(const nlohmann::json& record) {
    out_ << record.dump() << '\n';
    out_.flush();
    if (!out_) throw Error(ErrorCategory::kIo, "manifest write failed");
  }

 private:
  std::ofstream out_;
};

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string pad_index(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04zu", i);
  return buf;
}

}  // namespace

nlohmann::json RunConfig::snapshot() const {
  nlohmann::json j;
  j["dataset"] = dataset_root.string();
  j["strategy"] = strategy_name(strategy);
  j["seed"] = seed;
  j["shots_per_class"] = shots_per_class ? nlohmann::json(*shots_per_class) : nlohmann::json(nullptr);
  j["shot_mode"] = shot_mode == ShotMode::kFixed ? "fixed_shots" : "resample_per_request";
  j["provider_config"] = provider_config ? nlohmann::json(provider_config->string()) : nlohmann::json(nullptr);
  j["mock_script"] = mock_script ? nlohmann::json(mock_script->string()) : nlohmann::json(nullptr);
  j["abstention_policy"] = policy_name(abstention);
  j["limit"] = limit ? nlohmann::json(*limit) : nlohmann::json(nullptr);
  j["reasoning_text"] = reasoning_text ? nlohmann::json(*reasoning_text) : nlohmann::json(nullptr);
  j["class_order"] = class_order ? nlohmann::json(*class_order) : nlohmann::json(nullptr);
  j["positive_class"] = positive_class ? nlohmann::json(*positive_class) : nlohmann::json(nullptr);
  j["synonyms"] = synonyms ? nlohmann::json(*synonyms) : nlohmann::json(nullptr);
  return j;
}

void set_run_option(RunConfig& config, std::string_view key, std::string_view value) {
  const std::string k = replace_all(to_lower(trim(key)), "-", "_");
  if (k == "dataset") {
    config.dataset_root = std::string(value);
  } else if (k == "strategy") {
    const auto kind = parse_strategy(value);
    if (!kind) config_error("unknown strategy '" + std::string(value) + "'");
    config.strategy = *kind;
  } else if (k == "seed") {
    config.seed = parse_u64(k, value);
  } else if (k == "shots") {
    config.shots_per_class = static_cast<int>(parse_u64(k, value));
  } else if (k == "resample_per_request") {
    config.shot_mode = parse_bool(k, value) ? ShotMode::kResamplePerRequest : ShotMode::kFixed;
  } else if (k == "provider_config") {
    config.provider_config = std::string(value);
  } else if (k == "mock_script") {
    config.mock_script = std::string(value);
  } else if (k == "abstention_policy") {
    const auto p = parse_policy(value);
    if (!p) config_error("unknown abstention policy '" + std::string(value) + "'");
    config.abstention = *p;
  } else if (k == "out") {
    config.output_dir = std::string(value);
  } else if (k == "limit") {
    config.limit = parse_u64(k, value);
  } else if (k == "reasoning_text") {
    config.reasoning_text = std::string(value);
  } else if (k == "class_order") {
    config.class_order = parse_pair(k, value);
  } else if (k == "positive_class") {
    config.positive_class = trim(value);
  } else if (k == "synonyms") {
    const auto j = nlohmann::json::parse(value, nullptr, false);
    if (j.is_discarded() || !j.is_object()) config_error("synonyms must be a JSON object");
    std::map<std::string, std::string> m;
    for (const auto& [alias, label] : j.items()) {
      if (!label.is_string()) config_error("synonym '" + alias + "' must map to a class name");
      m.emplace(alias, label.get<std::string>());
    }
    config.synonyms = std::move(m);
  } else if (k == "concurrency") {
    config.concurrency = static_cast<int>(parse_u64(k, value));
  } else {
    throw Error(ErrorCategory::kInvalidArgument, "unknown run option '" + std::string(key) + "'");
  }
}

std::vector<std::string> deviation_notes(StrategyKind kind) {
  std::vector<std::string> notes = {
      "all content of a request is sent as one user message (attachments first, then text)",
      "test items are shuffled with the run seed before grouping; the last group may be short",
  };
  if (kind == StrategyKind::kIcl3) {
    notes.push_back("icl3 asks for one result per group (number of figures) instead of \"4 results\"");
  }
  if (kind == StrategyKind::kIclR1 || kind == StrategyKind::kIclR2) {
    notes.push_back("reasoning strategies fill the elided observation with configured text");
  }
  if (kind == StrategyKind::kIclR2) {
    notes.push_back("icl-r2 explanation contrasts the class-1 block with the class-2 block (image 4-6)");
  }
  return notes;
}

std::vector<RequestPlan> plan_requests(const RunConfig& config, const Dataset& dataset) {
  const Strategy strategy = strategy_for(config);
  auto tests = dataset.select(Split::kTest);
  SeededRng rng(derive_seed(config.seed, kTestOrderStream));
  for (std::size_t i = tests.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(tests[i - 1], tests[j]);
  }
  if (config.limit && *config.limit < tests.size()) tests.erase(tests.begin() + static_cast<std::ptrdiff_t>(*config.limit), tests.end());
  if (tests.empty()) throw Error(ErrorCategory::kPlanning, "no test items to plan");

  const auto shots = static_cast<std::size_t>(strategy.shots_per_class);
  std::vector<LabeledImage> fixed_shots;
  if (shots > 0 && config.shot_mode == ShotMode::kFixed) {
    fixed_shots = stratified_sample(dataset, Split::kTrain, shots, config.seed);
  }
  const auto group = static_cast<std::size_t>(strategy.queries_per_request);
  std::vector<RequestPlan> plans;
  for (std::size_t start = 0; start < tests.size(); start += group) {
    RequestPlan plan;
    plan.plan_index = plans.size();
    const std::size_t end = std::min(tests.size(), start + group);
    plan.queries.assign(tests.begin() + static_cast<std::ptrdiff_t>(start),
                        tests.begin() + static_cast<std::ptrdiff_t>(end));
    if (shots > 0) {
      if (config.shot_mode == ShotMode::kFixed) {
        plan.shot_seed = config.seed;
        plan.examples = fixed_shots;
      } else {
        plan.shot_seed = derive_seed(config.seed, plan.plan_index);
        plan.examples = stratified_sample(dataset, Split::kTrain, shots, plan.shot_seed);
      }
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

RunResult run_experiment(const RunConfig& config, Provider& provider, const RunOptions& options) {
  if (config.output_dir.empty()) config_error("run needs an output directory");
  const Strategy strategy = strategy_for(config);
  LoadOptions load;
  load.class_order = config.class_order;
  const Dataset dataset = load_dataset(config.dataset_root, load);
  const Task& task = dataset.task();
  const std::size_t positive = positive_index_for(config, task);
  const SynonymTable synonyms = synonyms_for(config, task);
  const auto plans = plan_requests(config, dataset);

  nlohmann::json header;
  header["kind"] = "header";
  header["format"] = kManifestFormat;
  header["config"] = config.snapshot();
  header["task"] = {task.first().name(), task.second().name()};
  header["positive"] = task[positive].name();
  header["abstention_policy"] = policy_name(config.abstention);
  header["synonyms"] = synonyms.to_json(task);
  header["strategy"] = {{"kind", strategy_name(strategy.kind)},
                        {"shots_per_class", strategy.shots_per_class},
                        {"queries_per_request", strategy.queries_per_request},
                        {"combine_into_figure", strategy.combine_into_figure},
                        {"reasoning_text", strategy.reasoning_text ? nlohmann::json(*strategy.reasoning_text)
                                                                   : nlohmann::json(nullptr)}};
  nlohmann::json templates = nlohmann::json::object();
  for (StrategyKind kind : all_strategies()) {
    templates[std::string(template_file_stem(kind))] = "sha256:" + sha256_hex(template_text(kind));
  }
  header["templates"] = templates;
  header["deviations"] = deviation_notes(strategy.kind);
  const auto validation = validate(dataset);
  header["dataset"] = validation.to_json();
  header["plan_count"] = plans.size();

  fs::create_directories(config.output_dir);
  const fs::path manifest = config.output_dir / std::string(kManifestFileName);
  RunResult result;
  result.manifest_path = manifest;

  std::set<std::size_t> done;
  if (fs::exists(manifest)) {
    auto existing = read_manifest_lines(manifest);
    if (existing.torn_tail) fs::resize_file(manifest, existing.valid_bytes);
    if (existing.records.empty()) {
      fs::remove(manifest);
    } else {
      if (existing.records.front().value("kind", "") != "header" ||
          existing.records.front().dump() != header.dump()) {
        config_error("output directory " + config.output_dir.string() +
                     " holds a manifest for a different configuration");
      }
      for (std::size_t i = 1; i < existing.records.size(); ++i) {
        const auto& r = existing.records[i];
        if (r.value("kind", "") == "summary") {
          result.completed = true;
          result.metrics = MetricsReport::from_json(r.at("metrics"));
        } else if (r.value("kind", "") == "request") {
          done.insert(parse_request_record(r, i + 1).plan_index);
        }
      }
      result.requests_resumed = done.size();
      if (result.completed) return result;
    }
  }
  if (!fs::exists(manifest)) ManifestWriter(manifest).append(header);

  std::vector<const RequestPlan*> pending;
  for (const auto& p : plans) {
    if (!done.count(p.plan_index)) pending.push_back(&p);
  }

  // Workers pull plans in order; records are committed strictly in plan
  // order so the manifest is independent of completion order.
  ManifestWriter writer(manifest);
  std::mutex mu;
  std::size_t next_pending = 0;
  std::size_t commit_cursor = 0;
  std::map<std::size_t, nlohmann::json> ready;  // keyed by position in `pending`
  std::vector<std::size_t> completion_order;
  std::size_t written = 0;
  bool stop = false;
  std::exception_ptr failure;

  const fs::path figure_dir = config.output_dir / "figures";
  auto execute = [&](const RequestPlan& plan) {
    std::vector<ComposedFigure> figures;
    if (strategy.combine_into_figure) {
      if (strategy.one_figure_per_query()) {
        for (const auto& q : plan.queries) {
          std::vector<LabeledImage> cells = plan.examples;
          cells.push_back(q);
          figures.push_back(compose_grid(cells, default_layout(static_cast<int>(cells.size()))));
        }
      } else {
        std::vector<LabeledImage> cells = plan.examples;
        cells.insert(cells.end(), plan.queries.begin(), plan.queries.end());
        figures.push_back(compose_grid(cells, default_layout(static_cast<int>(cells.size()))));
      }
      for (std::size_t f = 0; f < figures.size(); ++f) {
        write_file(figure_dir / ("plan-" + pad_index(plan.plan_index) + "-" + std::to_string(f + 1) + ".png"),
                   figures[f].png);
      }
    }
    PromptPackage package = render_prompt(strategy, task, plan.examples, plan.queries, figures);
    package.request_key = plan.request_key();

    nlohmann::json record;
    record["kind"] = "request";
    record["plan_index"] = plan.plan_index;
    record["request_key"] = package.request_key;
    record["shot_seed"] = plan.shot_seed;
    record["examples"] = nlohmann::json::array();
    for (const auto& e : plan.examples) record["examples"].push_back(e.id);
    record["queries"] = nlohmann::json::array();
    for (std::size_t i = 0; i < package.queries.size(); ++i) {
      record["queries"].push_back(query_json(package.queries[i], plan.queries[i].label));
    }
    record["prompt_text"] = package.text();
    record["attachments"] = package.attachment_digests();
    record["figures"] = nlohmann::json::array();
    for (const auto& f : figures) record["figures"].push_back(f.to_json());

    std::string raw;
    nlohmann::json error = nullptr;
    nlohmann::json volatile_part = nlohmann::json::object();
    int attempts = 0;
    try {
      ModelResponse response = provider.send(package);
      raw = std::move(response.raw_text);
      attempts = response.attempts;
      volatile_part = {{"request_id", response.request_id},
                       {"latency_ms", response.latency_ms},
                       {"timestamp", response.timestamp},
                       {"backoff_ms", response.backoff_ms}};
    } catch (const TransportError& e) {
      attempts = e.attempts();
      error = {{"category", category_name(e.category())},
               {"message", e.what()},
               {"last_status", e.last_status()}};
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::kPayload) throw;
      error = {{"category", category_name(e.category())}, {"message", e.what()}};
    }
    record["raw_response"] = raw;
    record["attempts"] = attempts;
    record["error"] = error;
    const auto predictions = parse_labels(raw, package.queries, task, synonyms);
    record["predictions"] = nlohmann::json::array();
    for (const auto& p : predictions) record["predictions"].push_back(p.to_json());
    record["volatile"] = volatile_part;
    return record;
  };

  const int threads = std::max(1, config.concurrency);
  auto worker = [&]() {
    for (;;) {
      std::size_t slot;
      {
        std::lock_guard lock(mu);
        if (stop || failure || next_pending >= pending.size()) return;
        slot = next_pending++;
      }
      nlohmann::json record;
      try {
        record = execute(*pending[slot]);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
      std::lock_guard lock(mu);
      completion_order.push_back(pending[slot]->plan_index);
      ready.emplace(slot, std::move(record));
      while (!stop && ready.count(commit_cursor)) {
        try {
          writer.append(ready[commit_cursor]);
        } catch (...) {
          if (!failure) failure = std::current_exception();
          return;
        }
        ready.erase(commit_cursor);
        ++commit_cursor;
        ++written;
        if (options.stop_after_records && written >= *options.stop_after_records) stop = true;
      }
    }
  };
  const auto started = std::chrono::steady_clock::now();
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  result.requests_sent = written;
  if (commit_cursor < pending.size()) return result;

  // Score from the file itself so resumed and uninterrupted runs agree.
  const auto lines = read_manifest_lines(manifest);
  std::vector<std::pair<std::size_t, nlohmann::json>> by_plan;
  for (std::size_t i = 1; i < lines.records.size(); ++i) {
    if (lines.records[i].value("kind", "") == "request") {
      by_plan.emplace_back(lines.records[i].at("plan_index").get<std::size_t>(), lines.records[i]);
    }
  }
  std::sort(by_plan.begin(), by_plan.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Prediction> all;
  std::map<std::string, ClassLabel> truths;
  for (const auto& [index, r] : by_plan) {
    for (const auto& q : r.at("queries")) {
      truths.emplace(q.at("item_id").get<std::string>(), ClassLabel(q.at("truth").get<std::string>()));
    }
    for (const auto& p : r.at("predictions")) all.push_back(Prediction::from_json(p));
  }
  const auto matrix = confusion(all, truths, task, positive, config.abstention);
  const auto metrics = report(matrix, task, positive);

  nlohmann::json summary;
  summary["kind"] = "summary";
  summary["request_count"] = by_plan.size();
  summary["predictions"] = nlohmann::json::array();
  for (const auto& p : all) {
    summary["predictions"].push_back({{"item_id", p.item_id},
                                      {"truth", truths.at(p.item_id).name()},
                                      {"predicted", p.predicted ? nlohmann::json(p.predicted->name())
                                                                : nlohmann::json(nullptr)},
                                      {"status", status_name(p.status)}});
  }
  summary["metrics"] = metrics.to_json();
  summary["volatile"] = {
      {"finished_at", now_utc()},
      {"elapsed_ms", std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count()},
      {"completion_order", completion_order}};
  writer.append(summary);
  result.completed = true;
  result.metrics = metrics;
  return result;
}

RunResult run_experiment(const RunConfig& config, const RunOptions& options) {
  if (config.mock_script) {
    auto script = MockScript::from_json(read_json_file(*config.mock_script, ErrorCategory::kConfig));
    ProviderConfig pc = MockProvider::mock_config();
    if (config.provider_config) {
      pc = ProviderConfig::from_json(read_json_file(*config.provider_config, ErrorCategory::kConfig));
    }
    MockProvider provider(std::move(script), pc);
    RunConfig effective = config;
    if (effective.concurrency == 0) effective.concurrency = 1;
    return run_experiment(effective, provider, options);
  }
  if (!config.provider_config) config_error("run needs --provider-config or --mock-script");
  const auto pc = ProviderConfig::from_json(read_json_file(*config.provider_config, ErrorCategory::kConfig));
  const char* secret = std::getenv(pc.credential_env.c_str());
  if (secret == nullptr || *secret == '\0') {
    throw Error(ErrorCategory::kCredential,
                "credential variable " + pc.credential_env + " is unset or empty");
  }
  auto provider = make_http_provider(pc);
  RunConfig effective = config;
  if (effective.concurrency == 0) {
    effective.concurrency = std::clamp(static_cast<int>(pc.max_requests_per_minute), 1, 16);
  }
  return run_experiment(effective, *provider, options);
}

ScoreResult score_manifest(const fs::path& manifest,
                           const std::optional<std::map<std::string, std::string>>& synonyms) {
  const auto lines = read_manifest_lines(manifest);
  if (lines.torn_tail) {
    throw Error(ErrorCategory::kIntegrity,
                manifest.string() + ": last record is truncated (line " +
                    std::to_string(lines.records.size() + 1) + ")");
  }
  if (lines.records.empty() || lines.records.front().value("kind", "") != "header") {
    throw Error(ErrorCategory::kIntegrity, manifest.string() + ": line 1 is not a header record");
  }
  const auto& header = lines.records.front();
  require_fields(header, 1, {"task", "positive", "abstention_policy", "synonyms"});
  std::optional<Task> task;
  SynonymTable recorded;
  std::size_t positive = 0;
  AbstentionPolicy policy = AbstentionPolicy::kCountAsError;
  try {
    task.emplace(ClassLabel(header.at("task").at(0).get<std::string>()),
                 ClassLabel(header.at("task").at(1).get<std::string>()));
    const auto p = task->index_of(header.at("positive").get<std::string>());
    if (!p) throw Error(ErrorCategory::kIntegrity, "header positive class is not in the task");
    positive = *p;
    const auto pol = parse_policy(header.at("abstention_policy").get<std::string>());
    if (!pol) throw Error(ErrorCategory::kIntegrity, "header has an unknown abstention policy");
    policy = *pol;
    recorded = SynonymTable::from_json(*task, header.at("synonyms"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::kIntegrity, std::string("manifest header: ") + e.what());
  }
  const SynonymTable active = synonyms ? SynonymTable(*task, *synonyms) : recorded;

  ScoreResult result;
  result.parser_config_changed = !(active == recorded);
  std::vector<Prediction> all;
  std::map<std::string, ClassLabel> truths;
  std::set<std::size_t> seen;
  bool have_summary = false;
  for (std::size_t i = 1; i < lines.records.size(); ++i) {
    const auto& r = lines.records[i];
    const std::string kind = r.value("kind", "");
    if (have_summary) {
      throw Error(ErrorCategory::kIntegrity, "record at line " + std::to_string(i + 1) +
                                                 " follows the summary");
    }
    if (kind == "request") {
      auto rec = parse_request_record(r, i + 1);
      if (!seen.insert(rec.plan_index).second) {
        throw Error(ErrorCategory::kIntegrity,
                    "line " + std::to_string(i + 1) + ": duplicate record for plan " +
                        std::to_string(rec.plan_index));
      }
      for (auto& [id, label] : rec.truths) truths.emplace(id, label);
      auto preds = parse_labels(rec.raw_response, rec.queries, *task, active);
      all.insert(all.end(), preds.begin(), preds.end());
    } else if (kind == "summary") {
      require_fields(r, i + 1, {"metrics"});
      try {
        result.embedded = MetricsReport::from_json(r.at("metrics"));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::kIntegrity, std::string("summary metrics: ") + e.what());
      }
      have_summary = true;
    } else {
      throw Error(ErrorCategory::kIntegrity,
                  "unknown record kind at line " + std::to_string(i + 1));
    }
  }
  if (!have_summary) {
    throw Error(ErrorCategory::kIntegrity,
                manifest.string() + ": no summary record (interrupted or truncated run)");
  }
  for (const auto& p : all) result.parsed_count += p.status == ParseStatus::kParsed ? 1 : 0;
  result.report = report(confusion(all, truths, *task, positive, policy), *task, positive);
  result.matches_embedded = result.embedded && *result.embedded == result.report;
  return result;
}

MetricsReport score_predictions_csv(const fs::path& csv,
                                    const std::optional<std::array<std::string, 2>>& class_order) {
  std::ifstream in(csv);
  if (!in) throw Error(ErrorCategory::kIo, "cannot open " + csv.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "item_id,true_label,predicted_label") {
    throw Error(ErrorCategory::kIntegrity,
                csv.string() + ": expected header item_id,true_label,predicted_label");
  }
  struct Row {
    std::string id, truth, predicted;
  };
  std::vector<Row> rows;
  std::set<std::string> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cols.emplace_back();
    if (cols.size() != 3 || cols[0].empty() || cols[1].empty()) {
      throw Error(ErrorCategory::kIntegrity, csv.string() + ": malformed row at line " + std::to_string(line_no));
    }
    labels.insert(cols[1]);
    if (!cols[2].empty()) labels.insert(cols[2]);
    rows.push_back({cols[0], cols[1], cols[2]});
  }
  std::array<std::string, 2> order;
  if (class_order) {
    order = *class_order;
  } else {
    std::set<std::string, bool (*)(const std::string&, const std::string&)> distinct(
        [](const std::string& a, const std::string& b) { return to_lower(a) < to_lower(b); });
    for (const auto& l : labels) distinct.insert(l);
    if (distinct.size() != 2) {
      throw Error(ErrorCategory::kTaskArity, csv.string() + ": found " + std::to_string(distinct.size()) +
                                                 " distinct labels; pass the class order explicitly");
    }
    order = {*distinct.begin(), *std::next(distinct.begin())};
    std::sort(order.begin(), order.end());
  }
  const Task task{ClassLabel(order[0]), ClassLabel(order[1])};
  std::vector<Prediction> preds;
  std::map<std::string, ClassLabel> truths;
  for (const auto& r : rows) {
    if (!truths.emplace(r.id, ClassLabel(r.truth)).second) {
      throw Error(ErrorCategory::kIntegrity, csv.string() + ": duplicate item " + r.id);
    }
    Prediction p;
    p.item_id = r.id;
    if (!r.predicted.empty()) {
      p.predicted.emplace(r.predicted);
      p.status = ParseStatus::kParsed;
    }
    preds.push_back(std::move(p));
  }
  return report(confusion(preds, truths, task), task);
}

std::string summary_csv(std::span<const fs::path> manifests) {
  struct Row {
    std::size_t strategy_rank;
    std::string strategy;
    std::string seed;
    MetricsReport metrics;
  };
  std::vector<Row> rows;
  for (const auto& path : manifests) {
    const auto lines = read_manifest_lines(path);
    if (lines.records.empty()) throw Error(ErrorCategory::kIntegrity, path.string() + ": empty manifest");
    const auto& header = lines.records.front();
    const std::string strategy = header.at("config").at("strategy").get<std::string>();
    const auto kind = parse_strategy(strategy);
    const std::size_t rank = kind ? static_cast<std::size_t>(*kind) : 99;
    rows.push_back({rank, strategy, header.at("config").at("seed").dump(), score_manifest(path).report});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.strategy_rank != b.strategy_rank) return a.strategy_rank < b.strategy_rank;
    return a.seed.size() != b.seed.size() ? a.seed.size() < b.seed.size() : a.seed < b.seed;
  });

  std::ostringstream out;
  out << kSummaryCsvHeader << "\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  auto emit = [&](const std::string& strategy, const std::string& seed, const ConfusionMatrix& m,
                  const std::array<double, 7>& v) {
    out << strategy << "," << seed << "," << m.tp << "," << m.fp << "," << m.fn << "," << m.tn;
    for (double x : v) out << "," << num(x);
    out << "," << m.total() << "," << m.excluded << "\n";
  };
  auto values = [](const MetricsReport& r) {
    return std::array<double, 7>{r.positive().precision.value(), r.positive().recall.value(),
                                 r.positive().f1.value(),        r.negative().precision.value(),
                                 r.negative().recall.value(),    r.negative().f1.value(),
                                 r.accuracy.value()};
  };
  for (std::size_t i = 0; i < rows.size();) {
    std::size_t j = i;
    ConfusionMatrix total;
    std::array<double, 7> mean{};
    while (j < rows.size() && rows[j].strategy == rows[i].strategy) {
      const auto& r = rows[j];
      emit(r.strategy, r.seed, r.metrics.matrix, values(r.metrics));
      total.tp += r.metrics.matrix.tp;
      total.fp += r.metrics.matrix.fp;
      total.fn += r.metrics.matrix.fn;
      total.tn += r.metrics.matrix.tn;
      total.excluded += r.metrics.matrix.excluded;
      const auto v = values(r.metrics);
      for (std::size_t k = 0; k < v.size(); ++k) mean[k] += v[k];
      ++j;
    }
    if (j - i > 1) {
      for (double& x : mean) x /= static_cast<double>(j - i);
      emit(rows[i].strategy, "mean", total, mean);
    }
    i = j;
  }
  return out.str();
}

std::string strip_volatile(std::string_view manifest_text) {
  std::string out;
  for (auto line : split_lines(manifest_text)) {
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      out.append(line);
    } else {
      if (j.is_object()) j.erase("volatile");
      out += j.dump();
    }
    out += "\n";
  }
  return out;
}

}  // namespace vlmicl

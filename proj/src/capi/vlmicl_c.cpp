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

#include "vlmicl/vlmicl.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include "vlmicl/composer.hpp"
#include "vlmicl/dataset.hpp"
#include "vlmicl/error.hpp"
#include "vlmicl/image.hpp"
#include "vlmicl/metrics.hpp"
#include "vlmicl/parser.hpp"
#include "vlmicl/runner.hpp"

struct vlmicl_dataset {
  vlmicl::Dataset dataset;
};

struct vlmicl_run_config {
  vlmicl::RunConfig config;
};

struct vlmicl_run_result {
  vlmicl::RunResult result;
};

namespace {

thread_local std::string g_last_error;

vlmicl_status status_of(vlmicl::ErrorCategory c) {
  using vlmicl::ErrorCategory;
  switch (c) {
    case ErrorCategory::kStructural: return VLMICL_E_STRUCTURAL;
    case ErrorCategory::kTaskArity: return VLMICL_E_TASK_ARITY;
    case ErrorCategory::kSampling: return VLMICL_E_SAMPLING;
    case ErrorCategory::kCapacity: return VLMICL_E_CAPACITY;
    case ErrorCategory::kUnsupportedLayout: return VLMICL_E_UNSUPPORTED_LAYOUT;
    case ErrorCategory::kComposition: return VLMICL_E_COMPOSITION;
    case ErrorCategory::kRender: return VLMICL_E_RENDER;
    case ErrorCategory::kTransport: return VLMICL_E_TRANSPORT;
    case ErrorCategory::kCredential: return VLMICL_E_CREDENTIAL;
    case ErrorCategory::kPayload: return VLMICL_E_PAYLOAD;
    case ErrorCategory::kHarness: return VLMICL_E_HARNESS;
    case ErrorCategory::kScoring: return VLMICL_E_SCORING;
    case ErrorCategory::kDegenerate: return VLMICL_E_DEGENERATE;
    case ErrorCategory::kIntegrity: return VLMICL_E_INTEGRITY;
    case ErrorCategory::kConfig: return VLMICL_E_CONFIG;
    case ErrorCategory::kPlanning: return VLMICL_E_PLANNING;
    case ErrorCategory::kIo: return VLMICL_E_IO;
    case ErrorCategory::kInvalidArgument: return VLMICL_E_INVALID_ARGUMENT;
  }
  return VLMICL_E_INTERNAL;
}

vlmicl_status fail(vlmicl_status s, std::string message) {
  g_last_error = std::move(message);
  return s;
}

template <typename F>
vlmicl_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return VLMICL_OK;
  } catch (const vlmicl::Error& e) {
    return fail(status_of(e.category()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(VLMICL_E_INVALID_ARGUMENT, std::string("invalid JSON: ") + e.what());
  } catch (const std::bad_alloc&) {
    return fail(VLMICL_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(VLMICL_E_INTERNAL, e.what());
  } catch (...) {
    return fail(VLMICL_E_INTERNAL, "unknown failure");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw vlmicl::Error(vlmicl::ErrorCategory::kInvalidArgument, what);
}

void fill(vlmicl_buffer* out, const void* data, std::size_t size) {
  auto* p = static_cast<std::uint8_t*>(std::malloc(size + 1));
  if (p == nullptr) throw std::bad_alloc();
  if (size) std::memcpy(p, data, size);
  p[size] = 0;
  out->data = p;
  out->size = size;
}

void fill(vlmicl_buffer* out, const std::string& s) { fill(out, s.data(), s.size()); }

vlmicl::Split split_of(vlmicl_split s) {
  require(s == VLMICL_SPLIT_TRAIN || s == VLMICL_SPLIT_TEST, "unknown split");
  return s == VLMICL_SPLIT_TRAIN ? vlmicl::Split::kTrain : vlmicl::Split::kTest;
}

std::array<std::string, 2> class_pair(const char* text) {
  vlmicl::RunConfig scratch;
  vlmicl::set_run_option(scratch, "class_order", text);
  return *scratch.class_order;
}

std::optional<std::map<std::string, std::string>> synonym_map(const char* json) {
  if (json == nullptr) return std::nullopt;
  vlmicl::RunConfig scratch;
  vlmicl::set_run_option(scratch, "synonyms", json);
  return scratch.synonyms;
}

vlmicl_class_metrics class_metrics(const vlmicl::ClassMetrics& m) {
  return {m.precision.value(), m.recall.value(), m.f1.value(),
          m.precision.rounded(), m.recall.rounded(), m.f1.rounded()};
}

}  // namespace

extern "C" {

const char* vlmicl_status_category(vlmicl_status status) {
  switch (status) {
    case VLMICL_OK: return "ok";
    case VLMICL_E_INTERNAL: return "internal";
    default: break;
  }
  static const vlmicl::ErrorCategory kAll[] = {
      vlmicl::ErrorCategory::kStructural,  vlmicl::ErrorCategory::kTaskArity,
      vlmicl::ErrorCategory::kSampling,    vlmicl::ErrorCategory::kCapacity,
      vlmicl::ErrorCategory::kUnsupportedLayout, vlmicl::ErrorCategory::kComposition,
      vlmicl::ErrorCategory::kRender,      vlmicl::ErrorCategory::kTransport,
      vlmicl::ErrorCategory::kCredential,  vlmicl::ErrorCategory::kPayload,
      vlmicl::ErrorCategory::kHarness,     vlmicl::ErrorCategory::kScoring,
      vlmicl::ErrorCategory::kDegenerate,  vlmicl::ErrorCategory::kIntegrity,
      vlmicl::ErrorCategory::kConfig,      vlmicl::ErrorCategory::kPlanning,
      vlmicl::ErrorCategory::kIo,          vlmicl::ErrorCategory::kInvalidArgument};
  for (auto c : kAll) {
    if (status_of(c) == status) return vlmicl::category_name(c).data();
  }
  return "unknown";
}

const char* vlmicl_last_error(void) { return g_last_error.c_str(); }

const char* vlmicl_version(void) { return "0.1.0"; }

void vlmicl_buffer_free(vlmicl_buffer* buffer) {
  if (buffer == nullptr) return;
  std::free(buffer->data);
  buffer->data = nullptr;
  buffer->size = 0;
}

vlmicl_status vlmicl_dataset_load(const char* root, const char* class_order, vlmicl_dataset** out) {
  return guarded([&] {
    require(root != nullptr && out != nullptr, "root and out are required");
    vlmicl::LoadOptions options;
    if (class_order != nullptr) options.class_order = class_pair(class_order);
    *out = new vlmicl_dataset{vlmicl::load_dataset(root, options)};
  });
}

void vlmicl_dataset_free(vlmicl_dataset* dataset) { delete dataset; }

vlmicl_status vlmicl_dataset_count(const vlmicl_dataset* dataset, vlmicl_split split,
                                   int class_index, size_t* out) {
  return guarded([&] {
    require(dataset != nullptr && out != nullptr, "dataset and out are required");
    require(class_index < 2, "class index must be 0 or 1");
    *out = class_index < 0
               ? dataset->dataset.count(split_of(split))
               : dataset->dataset.count(split_of(split), static_cast<std::size_t>(class_index));
  });
}

vlmicl_status vlmicl_dataset_class_name(const vlmicl_dataset* dataset, int class_index,
                                        vlmicl_buffer* out) {
  return guarded([&] {
    require(dataset != nullptr && out != nullptr, "dataset and out are required");
    require(class_index == 0 || class_index == 1, "class index must be 0 or 1");
    fill(out, dataset->dataset.task()[static_cast<std::size_t>(class_index)].name());
  });
}

vlmicl_status vlmicl_dataset_validate(const vlmicl_dataset* dataset, int as_json,
                                      vlmicl_buffer* out) {
  return guarded([&] {
    require(dataset != nullptr && out != nullptr, "dataset and out are required");
    const auto report = vlmicl::validate(dataset->dataset);
    fill(out, as_json ? report.to_json().dump(2) + "\n" : report.to_text());
  });
}

vlmicl_status vlmicl_dataset_sample(const vlmicl_dataset* dataset, vlmicl_split split,
                                    size_t k_per_class, uint64_t seed, vlmicl_buffer* out) {
  return guarded([&] {
    require(dataset != nullptr && out != nullptr, "dataset and out are required");
    std::string text;
    for (const auto& item : vlmicl::stratified_sample(dataset->dataset, split_of(split), k_per_class, seed)) {
      text += item.id;
      text += '\n';
    }
    fill(out, text);
  });
}

vlmicl_status vlmicl_compose_files(const char* const* paths, size_t count,
                                   const vlmicl_grid_options* options, vlmicl_buffer* png,
                                   vlmicl_buffer* layout_json) {
  return guarded([&] {
    require(png != nullptr, "png output is required");
    require(count == 0 || paths != nullptr, "paths are required");
    std::vector<vlmicl::CompositionSource> sources;
    for (size_t i = 0; i < count; ++i) {
      require(paths[i] != nullptr, "null path");
      vlmicl::Bitmap bitmap;
      try {
        bitmap = vlmicl::decode_image(vlmicl::read_file(paths[i]));
      } catch (const vlmicl::Error& e) {
        throw vlmicl::Error(vlmicl::ErrorCategory::kComposition,
                            std::string(paths[i]) + ": " + e.what());
      }
      sources.push_back({paths[i], std::move(bitmap)});
    }
    vlmicl::GridLayout layout;
    if (options != nullptr && options->rows > 0 && options->cols > 0) {
      layout.rows = options->rows;
      layout.cols = options->cols;
    } else {
      layout = vlmicl::default_layout(static_cast<int>(count));
    }
    if (options != nullptr) {
      require(options->cell_width >= 0 && options->cell_height >= 0 && options->padding >= 0 &&
                  options->caption_band >= 0,
              "grid sizes must be non-negative");
      if (options->cell_width) layout.cell_width = options->cell_width;
      if (options->cell_height) layout.cell_height = options->cell_height;
      if (options->padding) layout.padding = options->padding;
      if (options->caption_band) layout.annotation_band_height = options->caption_band;
    }
    const auto figure = vlmicl::compose_grid(sources, layout);
    fill(png, figure.png.data(), figure.png.size());
    if (layout_json != nullptr) fill(layout_json, figure.to_json().dump(2) + "\n");
  });
}

vlmicl_status vlmicl_metrics_compute(const vlmicl_matrix* matrix, vlmicl_metrics* out) {
  return guarded([&] {
    require(matrix != nullptr && out != nullptr, "matrix and out are required");
    const vlmicl::Task task{vlmicl::ClassLabel("positive"), vlmicl::ClassLabel("negative")};
    vlmicl::ConfusionMatrix m;
    m.tp = matrix->tp;
    m.fp = matrix->fp;
    m.fn = matrix->fn;
    m.tn = matrix->tn;
    const auto r = vlmicl::report(m, task);
    out->positive = class_metrics(r.positive());
    out->negative = class_metrics(r.negative());
    out->accuracy = r.accuracy.value();
    out->accuracy_2dp = r.accuracy.rounded();
  });
}

vlmicl_status vlmicl_parse_labels(const char* raw, const char* queries_json, const char* classes,
                                  const char* synonyms_json, vlmicl_buffer* out) {
  return guarded([&] {
    require(raw != nullptr && queries_json != nullptr && classes != nullptr && out != nullptr,
            "raw, queries, classes and out are required");
    const auto pair = class_pair(classes);
    const vlmicl::Task task{vlmicl::ClassLabel(pair[0]), vlmicl::ClassLabel(pair[1])};
    std::vector<vlmicl::QueryRef> queries;
    for (const auto& q : nlohmann::json::parse(queries_json)) {
      queries.push_back({q.value("group", 1), q.at("index").get<int>(), q.at("item_id").get<std::string>()});
    }
    const auto synonyms = synonym_map(synonyms_json);
    const auto table = synonyms ? vlmicl::SynonymTable(task, *synonyms) : vlmicl::SynonymTable::defaults(task);
    nlohmann::json result = nlohmann::json::array();
    for (const auto& p : vlmicl::parse_labels(raw, queries, task, table)) result.push_back(p.to_json());
    fill(out, result.dump());
  });
}

vlmicl_status vlmicl_run_config_new(vlmicl_run_config** out) {
  return guarded([&] {
    require(out != nullptr, "out is required");
    *out = new vlmicl_run_config{};
  });
}

void vlmicl_run_config_free(vlmicl_run_config* config) { delete config; }

vlmicl_status vlmicl_run_config_set(vlmicl_run_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config != nullptr && key != nullptr && value != nullptr, "config, key and value are required");
    vlmicl::set_run_option(config->config, key, value);
  });
}

vlmicl_status vlmicl_run(const vlmicl_run_config* config, size_t stop_after_records,
                         vlmicl_run_result** out) {
  return guarded([&] {
    require(config != nullptr && out != nullptr, "config and out are required");
    vlmicl::RunOptions options;
    if (stop_after_records > 0) options.stop_after_records = stop_after_records;
    *out = new vlmicl_run_result{vlmicl::run_experiment(config->config, options)};
  });
}

void vlmicl_run_result_free(vlmicl_run_result* result) { delete result; }

int vlmicl_run_result_completed(const vlmicl_run_result* result) {
  return result != nullptr && result->result.completed ? 1 : 0;
}

size_t vlmicl_run_result_sent(const vlmicl_run_result* result) {
  return result != nullptr ? result->result.requests_sent : 0;
}

size_t vlmicl_run_result_resumed(const vlmicl_run_result* result) {
  return result != nullptr ? result->result.requests_resumed : 0;
}

vlmicl_status vlmicl_run_result_manifest(const vlmicl_run_result* result, vlmicl_buffer* out) {
  return guarded([&] {
    require(result != nullptr && out != nullptr, "result and out are required");
    fill(out, result->result.manifest_path.string());
  });
}

vlmicl_status vlmicl_run_result_metrics(const vlmicl_run_result* result, vlmicl_buffer* out) {
  return guarded([&] {
    require(result != nullptr && out != nullptr, "result and out are required");
    if (!result->result.metrics) {
      throw vlmicl::Error(vlmicl::ErrorCategory::kHarness, "run did not finish; no metrics");
    }
    fill(out, result->result.metrics->to_json().dump(2) + "\n");
  });
}

vlmicl_status vlmicl_score(const char* manifest, const char* synonyms_json, vlmicl_buffer* out) {
  return guarded([&] {
    require(manifest != nullptr && out != nullptr, "manifest and out are required");
    const auto r = vlmicl::score_manifest(manifest, synonym_map(synonyms_json));
    nlohmann::json j;
    j["metrics"] = r.report.to_json();
    j["embedded"] = r.embedded ? r.embedded->to_json() : nlohmann::json(nullptr);
    j["matches_embedded"] = r.matches_embedded;
    j["parser_config_changed"] = r.parser_config_changed;
    j["parsed"] = r.parsed_count;
    fill(out, j.dump(2) + "\n");
  });
}

vlmicl_status vlmicl_score_predictions_csv(const char* csv, const char* class_order, vlmicl_buffer* out) {
  return guarded([&] {
    require(csv != nullptr && out != nullptr, "csv and out are required");
    std::optional<std::array<std::string, 2>> order;
    if (class_order != nullptr) order = class_pair(class_order);
    fill(out, vlmicl::score_predictions_csv(csv, order).to_json().dump(2) + "\n");
  });
}

vlmicl_status vlmicl_report_csv(const char* const* manifests, size_t count, vlmicl_buffer* out) {
  return guarded([&] {
    require(out != nullptr && (count == 0 || manifests != nullptr), "manifests and out are required");
    std::vector<std::filesystem::path> paths;
    for (size_t i = 0; i < count; ++i) {
      require(manifests[i] != nullptr, "null manifest path");
      paths.emplace_back(manifests[i]);
    }
    fill(out, vlmicl::summary_csv(paths));
  });
}

vlmicl_status vlmicl_strip_volatile(const char* manifest_text, vlmicl_buffer* out) {
  return guarded([&] {
    require(manifest_text != nullptr && out != nullptr, "text and out are required");
    fill(out, vlmicl::strip_volatile(manifest_text));
  });
}

}  // extern "C"

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

/* C interface to the vlmicl harness. All handles are opaque; every call
 * returns a vlmicl_status and leaves a thread-local message readable with
 * vlmicl_last_error(). Buffers returned through vlmicl_buffer are owned by
 * the caller and released with vlmicl_buffer_free(). */

#ifndef VLMICL_VLMICL_H_
#define VLMICL_VLMICL_H_

#include <stddef.h>
#include <stdint.h>

#if defined(VLMICL_BUILDING)
#define VLMICL_API __attribute__((visibility("default")))
#else
#define VLMICL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vlmicl_status {
  VLMICL_OK = 0,
  VLMICL_E_INVALID_ARGUMENT = 1,
  VLMICL_E_STRUCTURAL = 2,
  VLMICL_E_TASK_ARITY = 3,
  VLMICL_E_SAMPLING = 4,
  VLMICL_E_CAPACITY = 5,
  VLMICL_E_UNSUPPORTED_LAYOUT = 6,
  VLMICL_E_COMPOSITION = 7,
  VLMICL_E_RENDER = 8,
  VLMICL_E_TRANSPORT = 9,
  VLMICL_E_CREDENTIAL = 10,
  VLMICL_E_PAYLOAD = 11,
  VLMICL_E_HARNESS = 12,
  VLMICL_E_SCORING = 13,
  VLMICL_E_DEGENERATE = 14,
  VLMICL_E_INTEGRITY = 15,
  VLMICL_E_CONFIG = 16,
  VLMICL_E_PLANNING = 17,
  VLMICL_E_IO = 18,
  VLMICL_E_INTERNAL = 99
} vlmicl_status;

/* Stable lower-case category name, e.g. "task-arity". */
VLMICL_API const char* vlmicl_status_category(vlmicl_status status);
/* Message of the last failed call on this thread ("" when none). */
VLMICL_API const char* vlmicl_last_error(void);
VLMICL_API const char* vlmicl_version(void);

typedef struct vlmicl_buffer {
  uint8_t* data; /* NUL-terminated for text results */
  size_t size;   /* excludes the terminator */
} vlmicl_buffer;

VLMICL_API void vlmicl_buffer_free(vlmicl_buffer* buffer);

typedef enum vlmicl_split { VLMICL_SPLIT_TRAIN = 0, VLMICL_SPLIT_TEST = 1 } vlmicl_split;

/* ---- dataset ---- */
typedef struct vlmicl_dataset vlmicl_dataset;

/* class_order may be NULL (lexical order) or "A,B". */
VLMICL_API vlmicl_status vlmicl_dataset_load(const char* root, const char* class_order,
                                             vlmicl_dataset** out);
VLMICL_API void vlmicl_dataset_free(vlmicl_dataset* dataset);
/* class_index < 0 counts both classes. */
VLMICL_API vlmicl_status vlmicl_dataset_count(const vlmicl_dataset* dataset, vlmicl_split split,
                                              int class_index, size_t* out);
VLMICL_API vlmicl_status vlmicl_dataset_class_name(const vlmicl_dataset* dataset, int class_index,
                                                   vlmicl_buffer* out);
/* as_json != 0 gives the JSON report, otherwise the text summary. */
VLMICL_API vlmicl_status vlmicl_dataset_validate(const vlmicl_dataset* dataset, int as_json,
                                                 vlmicl_buffer* out);
/* Newline-separated item ids, class 0 first. */
VLMICL_API vlmicl_status vlmicl_dataset_sample(const vlmicl_dataset* dataset, vlmicl_split split,
                                               size_t k_per_class, uint64_t seed,
                                               vlmicl_buffer* out);

/* ---- composer ---- */
/* Composes the files into a captioned grid PNG. rows/cols of 0 select the
 * default layout; the remaining sizes of 0 select defaults. Layout JSON
 * (cells, placements, captions) goes to layout_json when non-NULL. */
typedef struct vlmicl_grid_options {
  int rows;
  int cols;
  int cell_width;
  int cell_height;
  int padding;
  int caption_band;
} vlmicl_grid_options;

VLMICL_API vlmicl_status vlmicl_compose_files(const char* const* paths, size_t count,
                                              const vlmicl_grid_options* options,
                                              vlmicl_buffer* png, vlmicl_buffer* layout_json);

/* ---- metrics ---- */
typedef struct vlmicl_matrix {
  uint64_t tp, fp, fn, tn;
} vlmicl_matrix;

typedef struct vlmicl_class_metrics {
  double precision, recall, f1;                 /* exact values */
  double precision_2dp, recall_2dp, f1_2dp;     /* rounded half-up */
} vlmicl_class_metrics;

typedef struct vlmicl_metrics {
  vlmicl_class_metrics positive;
  vlmicl_class_metrics negative;
  double accuracy;
  double accuracy_2dp;
} vlmicl_metrics;

VLMICL_API vlmicl_status vlmicl_metrics_compute(const vlmicl_matrix* matrix, vlmicl_metrics* out);

/* ---- parser ---- */
/* queries_json: [{"group":1,"index":3,"item_id":"..."}...]; classes "A,B";
 * synonyms_json may be NULL for the defaults. Output: prediction array. */
VLMICL_API vlmicl_status vlmicl_parse_labels(const char* raw, const char* queries_json,
                                             const char* classes, const char* synonyms_json,
                                             vlmicl_buffer* out);

/* ---- runs ---- */
typedef struct vlmicl_run_config vlmicl_run_config;
typedef struct vlmicl_run_result vlmicl_run_result;

VLMICL_API vlmicl_status vlmicl_run_config_new(vlmicl_run_config** out);
VLMICL_API void vlmicl_run_config_free(vlmicl_run_config* config);
/* Keys: dataset, strategy, seed, shots, resample_per_request, provider_config,
 * mock_script, abstention_policy, out, limit, reasoning_text, class_order,
 * positive_class, synonyms, concurrency. */
VLMICL_API vlmicl_status vlmicl_run_config_set(vlmicl_run_config* config, const char* key,
                                               const char* value);

/* stop_after_records of 0 runs to completion. */
VLMICL_API vlmicl_status vlmicl_run(const vlmicl_run_config* config, size_t stop_after_records,
                                    vlmicl_run_result** out);
VLMICL_API void vlmicl_run_result_free(vlmicl_run_result* result);
VLMICL_API int vlmicl_run_result_completed(const vlmicl_run_result* result);
VLMICL_API size_t vlmicl_run_result_sent(const vlmicl_run_result* result);
VLMICL_API size_t vlmicl_run_result_resumed(const vlmicl_run_result* result);
VLMICL_API vlmicl_status vlmicl_run_result_manifest(const vlmicl_run_result* result,
                                                    vlmicl_buffer* out);
/* Metrics JSON; fails with VLMICL_E_HARNESS for an unfinished run. */
VLMICL_API vlmicl_status vlmicl_run_result_metrics(const vlmicl_run_result* result,
                                                   vlmicl_buffer* out);

/* ---- scoring ---- */
/* Re-scores a manifest offline. Output JSON: {"metrics", "embedded",
 * "matches_embedded", "parser_config_changed", "parsed"}. */
VLMICL_API vlmicl_status vlmicl_score(const char* manifest, const char* synonyms_json,
                                      vlmicl_buffer* out);
/* Scores an item_id,true_label,predicted_label CSV; class_order may be NULL. */
VLMICL_API vlmicl_status vlmicl_score_predictions_csv(const char* csv, const char* class_order,
                                                      vlmicl_buffer* out);
/* Summary CSV over several manifests. */
VLMICL_API vlmicl_status vlmicl_report_csv(const char* const* manifests, size_t count,
                                           vlmicl_buffer* out);
/* Manifest text with the volatile members removed. */
VLMICL_API vlmicl_status vlmicl_strip_volatile(const char* manifest_text, vlmicl_buffer* out);

#ifdef __cplusplus
}
#endif

#endif /* VLMICL_VLMICL_H_ */

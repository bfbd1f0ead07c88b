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

// Command-line front end. Uses only the C interface of libvlmicl.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "vlmicl/vlmicl.h"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Failure {
  vlmicl_status status;
};

void check(vlmicl_status status) {
  if (status != VLMICL_OK) throw Failure{status};
}

// Owns a vlmicl_buffer for the scope of one call.
class Buffer {
 public:
  Buffer() = default;
  Buffer(const Buffer&) = delete;
  Buffer& operator=(const Buffer&) = delete;
  ~Buffer() { vlmicl_buffer_free(&buf_); }

  vlmicl_buffer* get() { return &buf_; }
  std::string str() const {
    return buf_.data ? std::string(reinterpret_cast<const char*>(buf_.data), buf_.size) : std::string();
  }

 private:
  vlmicl_buffer buf_{nullptr, 0};
};

void write_out(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) {
    std::fprintf(stderr, "error: io: cannot write %s\n", path.c_str());
    throw Failure{VLMICL_E_IO};
  }
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    std::cout.flush();
  } else {
    write_out(out_path, text);
  }
}

const char* opt(const std::optional<std::string>& s) { return s ? s->c_str() : nullptr; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot evaluation harness for vision-language models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(vlmicl_version()));

  // validate
  auto* validate = app.add_subcommand("validate", "Check a dataset tree and print counts");
  std::string validate_root;
  std::optional<std::string> validate_classes;
  bool validate_json = false;
  validate->add_option("root", validate_root, "Dataset root (train/ and test/)")->required();
  validate->add_option("--classes", validate_classes, "Class order, e.g. COVID,Normal");
  validate->add_flag("--json", validate_json, "Print the report as JSON");

  // sample
  auto* sample = app.add_subcommand("sample", "Print a seeded stratified sample of item ids");
  std::string sample_root;
  std::string sample_split = "train";
  std::size_t sample_k = 1;
  std::uint64_t sample_seed = 0;
  std::optional<std::string> sample_classes;
  sample->add_option("--dataset", sample_root)->required();
  sample->add_option("--split", sample_split)->check(CLI::IsMember({"train", "test"}));
  sample->add_option("--k", sample_k, "Items per class")->required();
  sample->add_option("--seed", sample_seed);
  sample->add_option("--classes", sample_classes);

  // compose
  auto* compose = app.add_subcommand("compose", "Compose images into a captioned grid (debugging aid)");
  std::vector<std::string> compose_files;
  std::string compose_out;
  std::string compose_layout;
  vlmicl_grid_options grid{0, 0, 0, 0, 0, 0};
  compose->add_option("files", compose_files, "Images in cell order")->required();
  compose->add_option("--out", compose_out, "Output PNG")->required();
  compose->add_option("--layout-json", compose_layout, "Write placements and captions here");
  compose->add_option("--rows", grid.rows)->check(CLI::NonNegativeNumber);
  compose->add_option("--cols", grid.cols)->check(CLI::NonNegativeNumber);
  compose->add_option("--cell-width", grid.cell_width)->check(CLI::NonNegativeNumber);
  compose->add_option("--cell-height", grid.cell_height)->check(CLI::NonNegativeNumber);
  compose->add_option("--padding", grid.padding)->check(CLI::NonNegativeNumber);
  compose->add_option("--caption-band", grid.caption_band)->check(CLI::NonNegativeNumber);

  // run
  auto* run = app.add_subcommand("run", "Run one experiment and write its manifest");
  std::vector<std::pair<std::string, std::string>> run_options;
  auto run_opt = [&](const std::string& flag, const std::string& key, const std::string& help) {
    return run->add_option_function<std::string>(
        flag, [&run_options, key](const std::string& v) { run_options.emplace_back(key, v); }, help);
  };
  run_opt("--dataset", "dataset", "Dataset root")->required();
  run_opt("--strategy", "strategy", "naive, icl1, icl2, icl3, icl4, icl-r1, icl-r2")->required();
  run_opt("--seed", "seed", "Run seed (default 0)");
  run_opt("--provider-config", "provider_config", "Provider JSON file");
  run_opt("--mock-script", "mock_script", "Scripted responses instead of a live endpoint");
  run_opt("--shots", "shots", "Shots per class (icl4, icl-r2)");
  run_opt("--limit", "limit", "Cap on test items");
  run_opt("--out", "out", "Output directory")->required();
  run_opt("--abstention-policy", "abstention_policy", "count_as_error or exclude");
  run_opt("--reasoning-text", "reasoning_text", "Observation text for icl-r1/icl-r2");
  run_opt("--classes", "class_order", "Class order, e.g. COVID,Normal");
  run_opt("--positive", "positive_class", "Positive class for metrics");
  run_opt("--synonyms", "synonyms", "JSON object of alias -> class");
  run_opt("--concurrency", "concurrency", "Requests in flight");
  bool resample = false;
  run->add_flag("--resample-per-request", resample, "Draw new shots for every request");
  std::size_t stop_after = 0;
  run->add_option("--stop-after", stop_after, "Stop after N request records (testing aid)")
      ->group("");

  // score
  auto* score = app.add_subcommand("score", "Re-score a manifest or a predictions CSV offline");
  std::string score_path;
  std::optional<std::string> score_synonyms;
  std::optional<std::string> score_classes;
  bool score_csv = false;
  score->add_option("manifest", score_path, "Run manifest, or a CSV with --predictions")->required();
  score->add_option("--synonyms", score_synonyms, "Override the parser's synonym table (JSON)");
  score->add_flag("--predictions", score_csv, "Input is item_id,true_label,predicted_label CSV");
  score->add_option("--classes", score_classes, "Class order for --predictions");

  // report
  auto* report = app.add_subcommand("report", "Aggregate manifests into the summary CSV");
  std::vector<std::string> report_manifests;
  std::string report_out;
  report->add_option("manifests", report_manifests)->required();
  report->add_option("--out", report_out, "Write the CSV here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: usage: %s\n", e.what());
    return kExitUsage;
  }

  try {
    if (*validate) {
      vlmicl_dataset* ds = nullptr;
      check(vlmicl_dataset_load(validate_root.c_str(), opt(validate_classes), &ds));
      Buffer text;
      const vlmicl_status s = vlmicl_dataset_validate(ds, validate_json ? 1 : 0, text.get());
      vlmicl_dataset_free(ds);
      check(s);
      emit(text.str(), "");
    } else if (*sample) {
      vlmicl_dataset* ds = nullptr;
      check(vlmicl_dataset_load(sample_root.c_str(), opt(sample_classes), &ds));
      Buffer ids;
      const vlmicl_status s = vlmicl_dataset_sample(
          ds, sample_split == "train" ? VLMICL_SPLIT_TRAIN : VLMICL_SPLIT_TEST, sample_k, sample_seed, ids.get());
      vlmicl_dataset_free(ds);
      check(s);
      emit(ids.str(), "");
    } else if (*compose) {
      std::vector<const char*> paths;
      for (const auto& f : compose_files) paths.push_back(f.c_str());
      Buffer png;
      Buffer layout;
      check(vlmicl_compose_files(paths.data(), paths.size(), &grid, png.get(),
                                 compose_layout.empty() ? nullptr : layout.get()));
      write_out(compose_out, png.str());
      if (!compose_layout.empty()) write_out(compose_layout, layout.str());
    } else if (*run) {
      vlmicl_run_config* cfg = nullptr;
      check(vlmicl_run_config_new(&cfg));
      vlmicl_run_result* result = nullptr;
      vlmicl_status s = VLMICL_OK;
      for (const auto& [key, value] : run_options) {
        s = vlmicl_run_config_set(cfg, key.c_str(), value.c_str());
        if (s != VLMICL_OK) break;
      }
      if (s == VLMICL_OK && resample) s = vlmicl_run_config_set(cfg, "resample_per_request", "true");
      if (s == VLMICL_OK) s = vlmicl_run(cfg, stop_after, &result);
      vlmicl_run_config_free(cfg);
      check(s);
      Buffer manifest;
      Buffer metrics;
      s = vlmicl_run_result_manifest(result, manifest.get());
      const bool completed = vlmicl_run_result_completed(result) != 0;
      std::fprintf(stderr, "manifest: %s (%zu sent, %zu resumed)\n", manifest.str().c_str(),
                   vlmicl_run_result_sent(result), vlmicl_run_result_resumed(result));
      if (s == VLMICL_OK && completed) s = vlmicl_run_result_metrics(result, metrics.get());
      vlmicl_run_result_free(result);
      check(s);
      if (completed) {
        emit(metrics.str(), "");
      } else {
        std::fprintf(stderr, "run stopped early; rerun the same command to resume\n");
      }
    } else if (*score) {
      Buffer out;
      if (score_csv) {
        check(vlmicl_score_predictions_csv(score_path.c_str(), opt(score_classes), out.get()));
      } else {
        check(vlmicl_score(score_path.c_str(), opt(score_synonyms), out.get()));
      }
      emit(out.str(), "");
    } else if (*report) {
      std::vector<const char*> paths;
      for (const auto& m : report_manifests) paths.push_back(m.c_str());
      Buffer csv;
      check(vlmicl_report_csv(paths.data(), paths.size(), csv.get()));
      emit(csv.str(), report_out);
    }
  } catch (const Failure& f) {
    if (f.status != VLMICL_E_IO || *vlmicl_last_error() != '\0') {
      std::fprintf(stderr, "error: %s: %s\n", vlmicl_status_category(f.status), vlmicl_last_error());
    }
    return f.status == VLMICL_E_INVALID_ARGUMENT ? kExitUsage : kExitFailure;
  }
  return 0;
}

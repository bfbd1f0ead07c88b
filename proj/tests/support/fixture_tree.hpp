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
#include <filesystem>
#include <functional>
#include <string>

#include "vlmicl/dataset.hpp"
#include "vlmicl/provider.hpp"
#include "vlmicl/runner.hpp"

namespace vlmicl::testing {

struct FixtureSpec {
  std::filesystem::path root;
  std::array<std::string, 2> classes = {"COVID", "Normal"};
  std::array<std::size_t, 2> train = {111, 70};
  std::array<std::size_t, 2> test = {26, 20};
  int size = 12;
  std::size_t jpeg_every = 0;      // every n-th file is written as JPEG (0: none)
  bool add_empty_file = false;     // a 0-byte .png in train/<class 0>
  bool add_stray_text_file = false;
};

/// Writes <root>/{train,test}/<class>/<class>_<split>_<n>.png with content
/// unique per file. Replaces any existing tree.
void make_fixture_tree(const FixtureSpec& spec);

/// Fresh directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

/// Class label the scripted model should answer for one query.
using Answer = std::function<std::string(const LabeledImage& query)>;

/// A keyed mock script answering every planned request of `config` with
/// "Image <index>: <answer>" lines.
MockScript script_for(const RunConfig& config, const Answer& answer);

/// Answers that realize the given confusion counts over the test split,
/// taking items of each class in id order: the first tp COVID items are
/// answered COVID, the rest Normal; the first tn Normal items are answered
/// Normal, the rest COVID.
Answer answers_for_matrix(const Dataset& dataset, std::size_t tp, std::size_t tn);

Answer all_correct();

}  // namespace vlmicl::testing

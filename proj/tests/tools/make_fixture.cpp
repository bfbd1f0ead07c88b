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

// Builds the fixture tree and mock scripts used by the CLI tests:
//   <dir>/data               111/70 train, 26/20 test
//   <dir>/allcorrect.json    naive, seed 0, every answer correct
//   <dir>/naive_matrix.json  naive, seed 0, tp=20 fp=4 fn=6 tn=16

#include <cstdio>
#include <exception>
#include <fstream>

#include "../support/fixture_tree.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <dir>\n", argv[0]);
    return 2;
  }
  try {
    namespace t = vlmicl::testing;
    const std::filesystem::path dir = argv[1];
    std::filesystem::create_directories(dir);
    t::FixtureSpec spec;
    spec.root = dir / "data";
    t::make_fixture_tree(spec);

    vlmicl::RunConfig config;
    config.dataset_root = spec.root;
    config.strategy = vlmicl::StrategyKind::kNaive;
    const auto dataset = vlmicl::load_dataset(spec.root);
    std::ofstream(dir / "allcorrect.json") << t::script_for(config, t::all_correct()).to_json().dump(1);
    std::ofstream(dir / "naive_matrix.json")
        << t::script_for(config, t::answers_for_matrix(dataset, 20, 16)).to_json().dump(1);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "make_fixture: %s\n", e.what());
    return 1;
  }
  return 0;
}

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

#include <doctest.h>

#include <fstream>
#include <sstream>

#include "../support/expect_error.hpp"
#include "../support/fixture_tree.hpp"
#include "vlmicl/composer.hpp"
#include "vlmicl/digest.hpp"
#include "vlmicl/prompts.hpp"

using namespace vlmicl;
using vlmicl::testing::catch_error;
namespace fs = std::filesystem;

namespace {

const Task kTask{ClassLabel("COVID"), ClassLabel("Normal")};

const Dataset& tree() {
  static const Dataset ds = [] {
    testing::FixtureSpec spec;
    spec.root = testing::scratch_dir("prompts") / "data";
    spec.train = {4, 4};
    spec.test = {3, 3};
    testing::make_fixture_tree(spec);
    return load_dataset(spec.root);
  }();
  return ds;
}

std::vector<LabeledImage> shots(std::size_t k) { return stratified_sample(tree(), Split::kTrain, k, 5); }

std::vector<LabeledImage> tests(std::size_t n) {
  auto all = tree().select(Split::kTest);
  all.resize(n, all.front());
  return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const std::string kTail =
    " In the subsequent line, please provide a comprehensive explanation of your classification.";

}  // namespace

TEST_SUITE("prompts") {
  TEST_CASE("compiled templates equal the golden files") {
    for (StrategyKind kind : all_strategies()) {
      const fs::path file = fs::path(VLMICL_SOURCE_DIR) / "templates" /
                            (std::string(template_file_stem(kind)) + ".txt");
      CHECK_MESSAGE(slurp(file) == template_text(kind), file.string());
    }
  }

  TEST_CASE("strategy arities") {
    struct Want {
      StrategyKind kind;
      int shots, queries;
      bool figure;
    };
    for (const Want w : {Want{StrategyKind::kNaive, 0, 1, false}, Want{StrategyKind::kIcl1, 1, 1, false},
                         Want{StrategyKind::kIcl2, 1, 1, true}, Want{StrategyKind::kIcl3, 1, 3, true},
                         Want{StrategyKind::kIcl4, 3, 3, true}, Want{StrategyKind::kIclR1, 1, 1, false},
                         Want{StrategyKind::kIclR2, 3, 3, true}}) {
      const auto s = Strategy::make(w.kind);
      CHECK(s.shots_per_class == w.shots);
      CHECK(s.queries_per_request == w.queries);
      CHECK(s.combine_into_figure == w.figure);
    }
    CHECK(Strategy::make(StrategyKind::kIcl4, std::nullopt, 2).shots_per_class == 2);
    CHECK(catch_error([] { Strategy::make(StrategyKind::kIcl4, std::nullopt, 4); }).category ==
          ErrorCategory::kConfig);
    CHECK(catch_error([] { Strategy::make(StrategyKind::kIcl1, std::nullopt, 2); }).category ==
          ErrorCategory::kConfig);
    CHECK(catch_error([] { Strategy::make(StrategyKind::kNaive, std::string("x")); }).category ==
          ErrorCategory::kConfig);
    CHECK(*Strategy::make(StrategyKind::kIclR1).reasoning_text == kDefaultReasoningText);
    CHECK(parse_strategy("ICL_R2") == StrategyKind::kIclR2);
    CHECK_FALSE(parse_strategy("icl5").has_value());
  }

  TEST_CASE("naive prompt text and attachment") {
    const auto q = tests(1);
    const auto p = render_prompt(Strategy::make(StrategyKind::kNaive), kTask, {}, q);
    CHECK(p.text() ==
          "Instruction: classify the image into two classes {COVID, Normal}.\n"
          "Please first output one line for the label of the image." + kTail);
    REQUIRE(p.messages.size() == 1);
    REQUIRE(p.messages[0].parts.size() == 2);
    CHECK(std::holds_alternative<ImageAttachment>(p.messages[0].parts[0]));
    CHECK(std::holds_alternative<TextPart>(p.messages[0].parts[1]));
    CHECK(p.attachment_digests() == std::vector<std::string>{q[0].content_digest});
    REQUIRE(p.queries.size() == 1);
    CHECK(p.queries[0].index == 1);
  }

  TEST_CASE("ICL1 sends three separate images") {
    const auto ex = shots(1);
    const auto p = render_prompt(Strategy::make(StrategyKind::kIcl1), kTask, ex, tests(1));
    CHECK(p.text() ==
          "Instruction: classify the images into two classes {COVID, Normal}\n\n"
          "Example: the label of the above images:\nImage 1: COVID\nImage 2: Normal\n"
          "Please first output one line for the label of image 3." + kTail);
    CHECK(p.attachment_count() == 3);
    CHECK(p.queries[0].index == 3);
  }

  TEST_CASE("ICL2 sends one composed figure") {
    const auto ex = shots(1);
    const auto q = tests(1);
    std::vector<LabeledImage> cells = ex;
    cells.push_back(q[0]);
    const std::vector<ComposedFigure> fig = {compose_grid(cells, default_layout(3))};
    const auto p = render_prompt(Strategy::make(StrategyKind::kIcl2), kTask, ex, q, fig);
    CHECK(p.attachment_digests() == std::vector<std::string>{fig[0].digest});
    CHECK(p.text().find("label of image 3.") != std::string::npos);
    // Without the figure the request is malformed.
    CHECK(catch_error([&] { render_prompt(Strategy::make(StrategyKind::kIcl2), kTask, ex, q); }).category ==
          ErrorCategory::kRender);
  }

  TEST_CASE("ICL3 sends one figure per group, each query is image 3") {
    const auto ex = shots(1);
    const auto q = tests(3);
    std::vector<ComposedFigure> figs;
    for (const auto& item : q) {
      std::vector<LabeledImage> cells = ex;
      cells.push_back(item);
      figs.push_back(compose_grid(cells, default_layout(3)));
    }
    const auto p = render_prompt(Strategy::make(StrategyKind::kIcl3), kTask, ex, q, figs);
    CHECK(p.attachment_count() == 3);
    CHECK(p.text().rfind("Instruction: classify the images into two classes for each group "
                         "{COVID, Normal}, generate 3 results.\n", 0) == 0);
    for (int g = 0; g < 3; ++g) {
      CHECK(p.queries[static_cast<std::size_t>(g)].group == g + 1);
      CHECK(p.queries[static_cast<std::size_t>(g)].index == 3);
    }
  }

  TEST_CASE("ICL4 numbering and short final group") {
    const auto ex = shots(3);
    auto render = [&](std::size_t n) {
      std::vector<LabeledImage> cells = ex;
      const auto q = tests(n);
      cells.insert(cells.end(), q.begin(), q.end());
      const std::vector<ComposedFigure> fig = {compose_grid(cells, default_layout(static_cast<int>(cells.size())))};
      return render_prompt(Strategy::make(StrategyKind::kIcl4), kTask, ex, q, fig);
    };
    const auto full = render(3);
    CHECK(full.text() ==
          "Instruction: classify the images into two classes {COVID, Normal}\n\n"
          "Example: the label of the above images:\nImage 1: COVID\nImage 2: COVID\nImage 3: COVID\n"
          "Image 4: Normal\nImage 5: Normal\nImage 6: Normal\n"
          "Please first output one line for the label of image 7, image 8 and image 9." + kTail);
    const auto one = render(1);
    CHECK(one.text().find("label of image 7.") != std::string::npos);
    CHECK(one.queries.size() == 1);
  }

  TEST_CASE("reasoning prompts") {
    const auto ex1 = shots(1);
    const auto r1 = render_prompt(Strategy::make(StrategyKind::kIclR1, std::string("patchy opacities")), kTask,
                                  ex1, tests(1));
    CHECK(r1.text().find("Explanation: In image 1 we can observe patchy opacities, but in image 2 we don't "
                         "have such observation. Thus we classified image 1 as COVID and image 2 as Normal.\n"
                         "Please provide the classification of Image 3 in one line, taking into account the "
                         "observed patterns in Image 3. Following that, offer a detailed explanation "
                         "step-by-step.") != std::string::npos);

    const auto ex3 = shots(3);
    std::vector<LabeledImage> cells = ex3;
    const auto q = tests(3);
    cells.insert(cells.end(), q.begin(), q.end());
    const std::vector<ComposedFigure> fig = {compose_grid(cells, default_layout(9))};
    const auto r2 = render_prompt(Strategy::make(StrategyKind::kIclR2), kTask, ex3, q, fig);
    CHECK(r2.text().find("Explanation: In image 1-3 we can observe visible opacities in the lung fields but "
                         "in image 4-6 we don't have such observation.\n") != std::string::npos);
  }

  TEST_CASE("no unresolved placeholders in any strategy") {
    for (StrategyKind kind : all_strategies()) {
      const auto s = Strategy::make(kind);
      const auto ex = shots(static_cast<std::size_t>(s.shots_per_class));
      const auto q = tests(static_cast<std::size_t>(s.queries_per_request));
      std::vector<ComposedFigure> figs;
      if (s.combine_into_figure) {
        const std::size_t n = s.one_figure_per_query() ? q.size() : 1;
        for (std::size_t f = 0; f < n; ++f) {
          std::vector<LabeledImage> cells = ex;
          if (s.one_figure_per_query()) {
            cells.push_back(q[f]);
          } else {
            cells.insert(cells.end(), q.begin(), q.end());
          }
          figs.push_back(compose_grid(cells, default_layout(static_cast<int>(cells.size()))));
        }
      }
      const auto p = render_prompt(s, kTask, ex, q, figs);
      CHECK_MESSAGE(p.text().find("${") == std::string::npos, strategy_name(kind));
      CHECK(p.text().find("{COVID, Normal}") != std::string::npos);
    }
  }

  TEST_CASE("render errors") {
    const auto ex = shots(1);
    // Class-1 example first.
    const std::vector<LabeledImage> swapped = {ex[1], ex[0]};
    CHECK(catch_error([&] { render_prompt(Strategy::make(StrategyKind::kIcl1), kTask, swapped, tests(1)); })
              .category == ErrorCategory::kRender);
    CHECK(catch_error([&] { render_prompt(Strategy::make(StrategyKind::kIcl1), kTask, {}, tests(1)); })
              .category == ErrorCategory::kRender);
    CHECK(catch_error([&] { render_prompt(Strategy::make(StrategyKind::kNaive), kTask, {}, tests(2)); })
              .category == ErrorCategory::kRender);
  }

  TEST_CASE("image enumeration") {
    const std::vector<int> three = {7, 8, 9};
    CHECK(enumerate_images(three) == "image 7, image 8 and image 9");
    CHECK(enumerate_images(std::vector<int>{7, 8}, true) == "Image 7 and Image 8");
    CHECK(enumerate_images(std::vector<int>{3}) == "image 3");
  }
}

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

#include <cstdlib>
#include <random>

#include "../support/expect_error.hpp"
#include "../support/fixture_tree.hpp"
#include "vlmicl/composer.hpp"
#include "vlmicl/digest.hpp"

using namespace vlmicl;
using vlmicl::testing::catch_error;

namespace {

CompositionSource solid(const std::string& id, int w, int h, Rgb c) { return {id, Bitmap(w, h, c)}; }

bool near(Rgb a, Rgb b, int tol) {
  return std::abs(a.r - b.r) <= tol && std::abs(a.g - b.g) <= tol && std::abs(a.b - b.b) <= tol;
}

}  // namespace

TEST_SUITE("composer") {
  TEST_CASE("default layouts") {
    struct Want {
      int n, rows, cols;
    };
    for (const Want w : {Want{1, 1, 1}, Want{2, 1, 2}, Want{3, 1, 3}, Want{4, 3, 2}, Want{6, 3, 2},
                         Want{7, 3, 3}, Want{9, 3, 3}}) {
      const auto l = default_layout(w.n);
      CHECK(l.rows == w.rows);
      CHECK(l.cols == w.cols);
      CHECK(l.cell_width == 512);
      CHECK(l.padding == 8);
      CHECK(l.annotation_band_height == 32);
    }
    CHECK(catch_error([] { default_layout(10); }).category == ErrorCategory::kUnsupportedLayout);
  }

  TEST_CASE("cell geometry follows the closed form") {
    std::mt19937 rng(3);
    for (int t = 0; t < 100; ++t) {
      GridLayout l;
      l.rows = 1 + static_cast<int>(rng() % 4);
      l.cols = 1 + static_cast<int>(rng() % 4);
      l.cell_width = 5 + static_cast<int>(rng() % 60);
      l.cell_height = 5 + static_cast<int>(rng() % 60);
      l.padding = static_cast<int>(rng() % 9);
      l.annotation_band_height = static_cast<int>(rng() % 20);
      CHECK(l.canvas_width() == l.cols * l.cell_width + (l.cols + 1) * l.padding);
      for (int i = 1; i <= l.capacity(); ++i) {
        const int row = (i - 1) / l.cols, col = (i - 1) % l.cols;
        const Rect c = cell_rect(l, i);
        CHECK(c.x == l.padding + col * (l.cell_width + l.padding));
        CHECK(c.y == l.padding + row * (l.cell_height + l.annotation_band_height + l.padding));
        CHECK(band_rect(l, i).y == c.bottom());
      }
    }
  }

  TEST_CASE("letterbox keeps aspect and centers") {
    const Rect cell{10, 20, 100, 100};
    const Rect wide = letterbox(200, 100, cell);
    CHECK(wide == Rect{10, 45, 100, 50});
    const Rect tall = letterbox(50, 100, cell);
    CHECK(tall == Rect{35, 20, 50, 100});
    CHECK(cell.contains(letterbox(1, 1, cell)));
  }

  TEST_CASE("solid-colour probe survives composition") {
    const std::vector<CompositionSource> sources = {solid("a", 40, 30, {200, 10, 10}),
                                                    solid("b", 30, 40, {10, 200, 10}),
                                                    solid("c", 33, 33, {10, 10, 200})};
    GridLayout l = default_layout(3);
    l.cell_width = l.cell_height = 64;
    const auto fig = compose_grid(sources, l);
    REQUIRE(fig.placements.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      const Rect& r = fig.placements[i].content;
      const Rgb want = sources[i].bitmap.at(0, 0);
      for (int y = r.y; y < r.bottom(); ++y) {
        for (int x = r.x; x < r.right(); ++x) REQUIRE(near(fig.image.at(x, y), want, 1));
      }
      // Letterbox margin keeps the background (the square source fills its cell).
      if (fig.placements[i].content != fig.placements[i].cell) {
        CHECK(fig.image.at(fig.placements[i].cell.x, fig.placements[i].cell.y) == Rgb{255, 255, 255});
      }
    }
    const auto decoded = decode_image(fig.png);
    CHECK(decoded == fig.image);
  }

  TEST_CASE("captions are drawn in the band only") {
    const std::vector<CompositionSource> sources = {solid("a", 20, 20, {255, 255, 255}),
                                                    solid("b", 20, 20, {255, 255, 255})};
    const auto fig = compose_grid(sources, default_layout(2));
    REQUIRE(fig.annotations.size() == 2);
    CHECK(fig.annotations[1].caption == "Image 2");
    int dark_in_band = 0;
    const Rect band = fig.annotations[0].band;
    for (int y = band.y; y < band.bottom(); ++y) {
      for (int x = band.x; x < band.right(); ++x) dark_in_band += fig.image.at(x, y).r < 128;
    }
    CHECK(dark_in_band > 0);
    // No dark pixels outside bands since the sources are white.
    int dark_elsewhere = 0;
    for (int y = 0; y < fig.image.height(); ++y) {
      for (int x = 0; x < fig.image.width(); ++x) {
        const Rect px{x, y, 1, 1};
        if (fig.annotations[0].band.contains(px) || fig.annotations[1].band.contains(px)) continue;
        dark_elsewhere += fig.image.at(x, y).r < 128;
      }
    }
    CHECK(dark_elsewhere == 0);
  }

  TEST_CASE("composition is byte-deterministic") {
    testing::FixtureSpec spec;
    spec.root = testing::scratch_dir("compose") / "data";
    spec.train = {5, 4};
    spec.test = {2, 2};
    spec.jpeg_every = 3;
    testing::make_fixture_tree(spec);
    const auto ds = load_dataset(spec.root);
    const auto items = ds.select(Split::kTrain);
    const std::vector<LabeledImage> nine(items.begin(), items.begin() + 9);
    const auto a = compose_grid(nine, default_layout(9));
    const auto b = compose_grid(nine, default_layout(9));
    CHECK(a.png == b.png);
    CHECK(a.digest == content_digest(a.png));
    CHECK(a.placements[8].source_id == nine[8].id);
    CHECK(a.to_json() == b.to_json());
  }

  TEST_CASE("capacity and unreadable sources") {
    const std::vector<CompositionSource> four(4, solid("x", 4, 4, {}));
    GridLayout small;
    small.rows = 1;
    small.cols = 3;
    CHECK(catch_error([&] { compose_grid(four, small); }).category == ErrorCategory::kCapacity);

    testing::FixtureSpec spec;
    spec.root = testing::scratch_dir("badsrc") / "data";
    spec.train = {2, 2};
    spec.test = {1, 1};
    testing::make_fixture_tree(spec);
    auto items = load_dataset(spec.root).select(Split::kTrain);
    write_text_file(items[1].path, "garbage");
    const auto caught = catch_error([&] { compose_grid(items, default_layout(4)); });
    CHECK(caught.category == ErrorCategory::kComposition);
    CHECK(caught.message.find(items[1].id) != std::string::npos);
  }

  TEST_CASE("resize of a constant image is constant") {
    const Bitmap src(17, 9, Rgb{12, 34, 56});
    const Bitmap up = resize(src, 40, 31);
    const Bitmap down = resize(src, 3, 2);
    for (int y = 0; y < up.height(); ++y) {
      for (int x = 0; x < up.width(); ++x) REQUIRE(up.at(x, y) == Rgb{12, 34, 56});
    }
    CHECK(down.at(1, 1) == Rgb{12, 34, 56});
  }
}

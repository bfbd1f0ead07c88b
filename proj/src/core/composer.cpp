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

#include "vlmicl/composer.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "vlmicl/digest.hpp"
#include "vlmicl/error.hpp"

namespace vlmicl {

namespace {

void check_layout(const GridLayout& layout) {
  if (layout.rows < 1 || layout.cols < 1 || layout.cell_width < 1 || layout.cell_height < 1 ||
      layout.padding < 0 || layout.annotation_band_height < 0) {
    throw Error(ErrorCategory::kInvalidArgument, "invalid grid layout");
  }
}

struct Glyph {
  char ch;
  std::array<std::uint8_t, 7> rows;
};

// HD44780-style 5x7 glyphs; only what "Image N" needs.
constexpr std::array<Glyph, 15> kFont = {{
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'m', {0x00, 0x00, 0x1A, 0x15, 0x15, 0x11, 0x11}},
    {'a', {0x00, 0x00, 0x0E, 0x01, 0x0F, 0x11, 0x0F}},
    {'g', {0x00, 0x0F, 0x11, 0x11, 0x0F, 0x01, 0x0E}},
    {'e', {0x00, 0x00, 0x0E, 0x11, 0x1F, 0x10, 0x0E}},
}};

constexpr std::array<std::uint8_t, 7> kMissingGlyph = {0x1F, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1F};
constexpr std::array<std::uint8_t, 7> kBlankGlyph = {};
constexpr int kGlyphWidth = 5;
constexpr int kGlyphHeight = 7;
constexpr int kGlyphAdvance = 6;

const std::array<std::uint8_t, 7>& glyph_for(char ch) {
  if (ch == ' ') return kBlankGlyph;
  for (const auto& g : kFont) {
    if (g.ch == ch) return g.rows;
  }
  return kMissingGlyph;
}

struct Contribution {
  int first = 0;
  std::vector<double> weights;
};

std::vector<Contribution> contributions(int src, int dst) {
  const double scale = static_cast<double>(src) / dst;
  const double filter_scale = std::max(scale, 1.0);
  std::vector<Contribution> out(static_cast<std::size_t>(dst));
  for (int i = 0; i < dst; ++i) {
    const double center = (i + 0.5) * scale;
    const int lo = std::max(0, static_cast<int>(std::floor(center - filter_scale)));
    const int hi = std::min(src, static_cast<int>(std::ceil(center + filter_scale)));
    auto& c = out[static_cast<std::size_t>(i)];
    c.first = lo;
    double total = 0.0;
    for (int k = lo; k < hi; ++k) {
      const double t = std::abs((k + 0.5 - center) / filter_scale);
      const double w = t < 1.0 ? 1.0 - t : 0.0;
      c.weights.push_back(w);
      total += w;
    }
    if (total <= 0.0) {
      // Degenerate window; fall back to nearest source sample.
      c.first = std::clamp(static_cast<int>(center), 0, src - 1);
      c.weights.assign(1, 1.0);
      total = 1.0;
    }
    for (double& w : c.weights) w /= total;
  }
  return out;
}

std::uint8_t to_channel(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

nlohmann::json GridLayout::to_json() const {
  return {{"rows", rows},
          {"cols", cols},
          {"cell_width", cell_width},
          {"cell_height", cell_height},
          {"padding", padding},
          {"annotation_band_height", annotation_band_height},
          {"background", {background.r, background.g, background.b}}};
}

GridLayout default_layout(int n) {
  if (n < 1) throw Error(ErrorCategory::kInvalidArgument, "layout needs at least one image");
  if (n > kMaxGridImages) {
    throw Error(ErrorCategory::kUnsupportedLayout,
                "no default layout for " + std::to_string(n) + " images (max 9)");
  }
  GridLayout layout;
  if (n <= 3) {
    layout.rows = 1;
    layout.cols = n;
  } else {
    layout.rows = 3;
    layout.cols = std::min(3, (n + 2) / 3);
  }
  return layout;
}

Rect cell_rect(const GridLayout& layout, int index) {
  const int row = (index - 1) / layout.cols;
  const int col = (index - 1) % layout.cols;
  return {layout.padding + col * (layout.cell_width + layout.padding),
          layout.padding +
              row * (layout.cell_height + layout.annotation_band_height + layout.padding),
          layout.cell_width, layout.cell_height};
}

Rect band_rect(const GridLayout& layout, int index) {
  const Rect cell = cell_rect(layout, index);
  return {cell.x, cell.bottom(), cell.width, layout.annotation_band_height};
}

Rect letterbox(int src_w, int src_h, const Rect& cell) {
  const double scale = std::min(static_cast<double>(cell.width) / src_w,
                                static_cast<double>(cell.height) / src_h);
  const int w = std::clamp(static_cast<int>(std::lround(src_w * scale)), 1, cell.width);
  const int h = std::clamp(static_cast<int>(std::lround(src_h * scale)), 1, cell.height);
  return {cell.x + (cell.width - w) / 2, cell.y + (cell.height - h) / 2, w, h};
}

Bitmap resize(const Bitmap& source, int width, int height) {
  if (source.empty() || width < 1 || height < 1) {
    throw Error(ErrorCategory::kInvalidArgument, "resize of empty bitmap or to empty size");
  }
  if (source.width() == width && source.height() == height) return source;
  const auto horiz = contributions(source.width(), width);
  const auto vert = contributions(source.height(), height);

  // Horizontal pass into a float buffer, then vertical pass.
  std::vector<double> tmp(static_cast<std::size_t>(width) * source.height() * 3);
  const auto src = source.pixels();
  for (int y = 0; y < source.height(); ++y) {
    for (int x = 0; x < width; ++x) {
      const auto& c = horiz[static_cast<std::size_t>(x)];
      double acc[3] = {0, 0, 0};
      for (std::size_t k = 0; k < c.weights.size(); ++k) {
        const std::size_t off =
            (static_cast<std::size_t>(y) * source.width() + c.first + k) * 3;
        for (int ch = 0; ch < 3; ++ch) acc[ch] += c.weights[k] * src[off + ch];
      }
      const std::size_t out = (static_cast<std::size_t>(y) * width + x) * 3;
      for (int ch = 0; ch < 3; ++ch) tmp[out + ch] = acc[ch];
    }
  }
  Bitmap result(width, height);
  auto dst = result.pixels();
  for (int y = 0; y < height; ++y) {
    const auto& c = vert[static_cast<std::size_t>(y)];
    for (int x = 0; x < width; ++x) {
      double acc[3] = {0, 0, 0};
      for (std::size_t k = 0; k < c.weights.size(); ++k) {
        const std::size_t off = ((c.first + k) * static_cast<std::size_t>(width) + x) * 3;
        for (int ch = 0; ch < 3; ++ch) acc[ch] += c.weights[k] * tmp[off + ch];
      }
      const std::size_t out = (static_cast<std::size_t>(y) * width + x) * 3;
      for (int ch = 0; ch < 3; ++ch) dst[out + ch] = to_channel(acc[ch]);
    }
  }
  return result;
}

bool draw_caption(Bitmap& canvas, const Rect& box, std::string_view text, Rgb color) {
  if (text.empty() || box.width <= 0 || box.height <= 0) return false;
  const int text_w = static_cast<int>(text.size()) * kGlyphAdvance - 1;
  const int margin = 2;
  const int scale = std::min((box.height - 2 * margin) / kGlyphHeight, box.width / text_w);
  if (scale < 1) return false;
  const int x0 = box.x + (box.width - text_w * scale) / 2;
  const int y0 = box.y + (box.height - kGlyphHeight * scale) / 2;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto& rows = glyph_for(text[i]);
    const int gx = x0 + static_cast<int>(i) * kGlyphAdvance * scale;
    for (int r = 0; r < kGlyphHeight; ++r) {
      for (int c = 0; c < kGlyphWidth; ++c) {
        if (rows[static_cast<std::size_t>(r)] & (0x10 >> c)) {
          canvas.fill_rect(gx + c * scale, y0 + r * scale, scale, scale, color);
        }
      }
    }
  }
  return true;
}

nlohmann::json ComposedFigure::to_json() const {
  nlohmann::json j;
  j["layout"] = layout.to_json();
  j["digest"] = digest;
  j["placements"] = nlohmann::json::array();
  for (const auto& p : placements) {
    j["placements"].push_back({{"index", p.index},
                               {"source_id", p.source_id},
                               {"cell", {p.cell.x, p.cell.y, p.cell.width, p.cell.height}},
                               {"content",
                                {p.content.x, p.content.y, p.content.width, p.content.height}}});
  }
  j["annotations"] = nlohmann::json::array();
  for (const auto& a : annotations) {
    j["annotations"].push_back({{"index", a.index}, {"caption", a.caption}});
  }
  return j;
}

ComposedFigure compose_grid(std::span<const CompositionSource> sources, const GridLayout& layout) {
  check_layout(layout);
  const int count = static_cast<int>(sources.size());
  if (count < 1) throw Error(ErrorCategory::kInvalidArgument, "nothing to compose");
  if (count > layout.capacity()) {
    throw Error(ErrorCategory::kCapacity, std::to_string(count) + " images exceed " +
                                              std::to_string(layout.rows) + "x" +
                                              std::to_string(layout.cols) + " grid capacity");
  }
  ComposedFigure fig;
  fig.layout = layout;
  fig.image = Bitmap(layout.canvas_width(), layout.canvas_height(), layout.background);
  for (int i = 1; i <= count; ++i) {
    const auto& src = sources[static_cast<std::size_t>(i - 1)];
    if (src.bitmap.empty()) {
      throw Error(ErrorCategory::kComposition, "source '" + src.id + "' has no pixels");
    }
    const Rect cell = cell_rect(layout, i);
    const Rect content = letterbox(src.bitmap.width(), src.bitmap.height(), cell);
    const Bitmap scaled = resize(src.bitmap, content.width, content.height);
    for (int y = 0; y < content.height; ++y) {
      for (int x = 0; x < content.width; ++x) {
        fig.image.set(content.x + x, content.y + y, scaled.at(x, y));
      }
    }
    const std::string caption = "Image " + std::to_string(i);
    const Rect band = band_rect(layout, i);
    draw_caption(fig.image, band, caption, Rgb{0, 0, 0});
    fig.placements.push_back({i, cell, content, src.id});
    fig.annotations.push_back({i, caption, band});
  }
  fig.png = encode_png(fig.image);
  fig.digest = content_digest(fig.png);
  return fig;
}

ComposedFigure compose_grid(std::span<const LabeledImage> images, const GridLayout& layout) {
  std::vector<CompositionSource> sources;
  sources.reserve(images.size());
  for (const auto& item : images) {
    try {
      sources.push_back({item.id, decode_image(read_file(item.path))});
    } catch (const Error& e) {
      throw Error(ErrorCategory::kComposition,
                  "cannot decode source '" + item.id + "': " + e.what());
    }
  }
  return compose_grid(sources, layout);
}

}  // namespace vlmicl

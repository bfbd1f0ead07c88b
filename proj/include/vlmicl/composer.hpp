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

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vlmicl/dataset.hpp"
#include "vlmicl/image.hpp"

namespace vlmicl {

struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  int right() const noexcept { return x + width; }
  int bottom() const noexcept { return y + height; }
  bool contains(const Rect& other) const noexcept {
    return other.x >= x && other.y >= y && other.right() <= right() && other.bottom() <= bottom();
  }
  bool intersects(const Rect& other) const noexcept {
    return x < other.right() && other.x < right() && y < other.bottom() && other.y < bottom();
  }
  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Canvas geometry for a row-major grid of captioned cells:
///   width  = cols * cell_width + (cols + 1) * padding
///   height = rows * (cell_height + annotation_band_height) + (rows + 1) * padding
struct GridLayout {
  int rows = 1;
  int cols = 1;
  int cell_width = 512;
  int cell_height = 512;
  int padding = 8;
  int annotation_band_height = 32;
  Rgb background{255, 255, 255};

  int capacity() const noexcept { return rows * cols; }
  int canvas_width() const noexcept { return cols * cell_width + (cols + 1) * padding; }
  int canvas_height() const noexcept {
    return rows * (cell_height + annotation_band_height) + (rows + 1) * padding;
  }

  nlohmann::json to_json() const;
};

inline constexpr int kMaxGridImages = 9;

/// 1..3 images: one row; 4..9: three rows of ceil(n/3) columns. Throws
/// Error(kUnsupportedLayout) above nine.
GridLayout default_layout(int n);

/// Cell and caption-band rectangles of 1-based `index`, row-major.
Rect cell_rect(const GridLayout& layout, int index);
Rect band_rect(const GridLayout& layout, int index);

/// Centered, aspect-preserving fit of a src_w x src_h image inside `cell`.
Rect letterbox(int src_w, int src_h, const Rect& cell);

/// Separable triangle-filter resample (widened filter when shrinking).
Bitmap resize(const Bitmap& source, int width, int height);

struct Placement {
  int index = 0;
  Rect cell;
  Rect content;  // letterboxed image area inside `cell`
  std::string source_id;
};

struct Annotation {
  int index = 0;
  std::string caption;
  Rect band;
};

struct ComposedFigure {
  GridLayout layout;
  Bitmap image;
  std::vector<Placement> placements;
  std::vector<Annotation> annotations;
  Bytes png;
  std::string digest;  // content digest of `png`

  nlohmann::json to_json() const;
};

struct CompositionSource {
  std::string id;
  Bitmap bitmap;
};

ComposedFigure compose_grid(std::span<const CompositionSource> sources, const GridLayout& layout);

/// Decodes each item's file first; an unreadable file raises
/// Error(kComposition) naming the item id.
ComposedFigure compose_grid(std::span<const LabeledImage> images, const GridLayout& layout);

/// Draws `text` with the embedded 5x7 bitmap font, centered in `box` at the
/// largest integer scale that fits. Returns false when nothing fits.
bool draw_caption(Bitmap& canvas, const Rect& box, std::string_view text, Rgb color);

}  // namespace vlmicl

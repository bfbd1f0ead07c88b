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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace vlmicl {

using Bytes = std::vector<std::uint8_t>;

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Packed 8-bit RGB raster, row-major, no row padding.
class Bitmap {
 public:
  Bitmap() = default;
  Bitmap(int width, int height, Rgb fill = {});

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return width_ == 0 || height_ == 0; }

  Rgb at(int x, int y) const;
  void set(int x, int y, Rgb color);
  void fill_rect(int x, int y, int w, int h, Rgb color);

  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
  std::span<std::uint8_t> pixels() noexcept { return pixels_; }

  friend bool operator==(const Bitmap&, const Bitmap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

enum class MediaType { kPng, kJpeg };

std::string_view media_type_name(MediaType type);

/// Detects PNG/JPEG by magic bytes.
std::optional<MediaType> sniff_media_type(std::span<const std::uint8_t> data);

/// Decodes PNG or JPEG into RGB. Grayscale and alpha inputs are flattened to
/// RGB (alpha composited over black by libpng's simplified reader). Throws
/// Error(kIo) on malformed input.
Bitmap decode_image(std::span<const std::uint8_t> data);

/// Lossless, byte-deterministic PNG encoding (no timestamps or text chunks).
Bytes encode_png(const Bitmap& bitmap);

/// Baseline JPEG encoding, used to build fixture trees.
Bytes encode_jpeg(const Bitmap& bitmap, int quality = 90);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace vlmicl

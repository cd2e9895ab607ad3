// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "semprobe/digest.hpp"

namespace semprobe {

/// 8-bit interleaved RGB raster, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  RgbImage() = default;
  RgbImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {}

  std::uint8_t* at(int x, int y) {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  const std::uint8_t* at(int x, int y) const {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  bool operator==(const RgbImage&) const = default;
};

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
  bool operator==(const GrayImage&) const = default;
};

// Any PNG colour type is converted (alpha is dropped). Throws kFormat.
RgbImage decode_png_rgb(std::span<const std::uint8_t> png);
GrayImage decode_png_gray(std::span<const std::uint8_t> png);
Bytes encode_png(const RgbImage& image);
Bytes encode_png(const GrayImage& image);

struct PngSize {
  int width = 0;
  int height = 0;
};
PngSize png_size(std::span<const std::uint8_t> png);

/// Content-addressed reference to an uploaded image.
struct ImageRef {
  std::string id;  // sha256 hex of the encoded bytes
  int width = 0;
  int height = 0;
  std::string source_name;
  bool operator==(const ImageRef&) const = default;
};

ImageRef make_image_ref(std::span<const std::uint8_t> png, std::string source_name);

}  // namespace semprobe

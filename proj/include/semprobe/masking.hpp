// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "semprobe/digest.hpp"
#include "semprobe/error.hpp"
#include "semprobe/image.hpp"

namespace semprobe {

/// Binary inpainting mask. One byte per pixel (0 or 1), row-major.
class RasterMask {
 public:
  RasterMask() = default;
  // Throws kInvalidArgument on non-positive dimensions.
  RasterMask(int width, int height);
  // Throws kInvalidArgument if bits.size() != width * height or a value is not 0/1.
  RasterMask(int width, int height, std::vector<std::uint8_t> bits);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  bool get(int x, int y) const {
    return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  void set(int x, int y, bool v) {
    bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0;
  }
  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  std::size_t popcount() const noexcept;
  bool empty() const noexcept { return popcount() == 0; }

  bool operator==(const RasterMask&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct PointD {
  double x = 0;
  double y = 0;
  bool operator==(const PointD&) const = default;
};

enum class StrokeMode { kAdd, kErase };

struct BrushStroke {
  std::vector<PointD> points;
  double radius = 1;
  StrokeMode mode = StrokeMode::kAdd;
};

/// Inclusive pixel rectangle.
struct PixelRect {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;
};

/// Applies strokes in order. A pixel (x, y) is touched when its distance to the
/// stroke polyline is <= radius; a single-point stroke is a disc.
RasterMask rasterize_strokes(std::span<const BrushStroke> strokes, int width, int height);

RasterMask mask_from_boxes(std::span<const PixelRect> boxes, int width, int height);

/// Square (Chebyshev) structuring element; radius 0 is the identity.
RasterMask dilate(const RasterMask& mask, int radius);

/// Alternating run lengths starting with the 0-run: "3;4;9".
std::string encode_rle(const RasterMask& mask);
// Throws kFormat on malformed text or a run total different from width*height.
RasterMask decode_rle(std::string_view text, int width, int height);

/// 8-bit gray PNG, 255 = inpaint, 0 = keep.
Bytes mask_to_png(const RasterMask& mask);
RasterMask mask_from_png(std::span<const std::uint8_t> png);

// ---------------------------------------------------------------------------
// Auto-masking service

class AutoMaskClient {
 public:
  virtual ~AutoMaskClient() = default;
  /// Returns the service's mask PNG for `image_png`.
  virtual Bytes segment(const ImageRef& image, std::span<const std::uint8_t> image_png,
                        std::string_view prompt) = 0;
};

/// Text-prompted segmentation over HTTP: POST /segment {image, prompt} -> {mask}.
class HttpAutoMaskClient final : public AutoMaskClient {
 public:
  explicit HttpAutoMaskClient(std::string base_url,
                              std::chrono::milliseconds timeout = std::chrono::seconds(60));
  Bytes segment(const ImageRef& image, std::span<const std::uint8_t> image_png,
                std::string_view prompt) override;

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

/// Returns fixture masks keyed by (image id, prompt); unknown keys give an
/// all-zero mask of the image's size.
class MockAutoMaskClient final : public AutoMaskClient {
 public:
  void add_fixture(const std::string& image_id, const std::string& prompt, RasterMask mask);
  Bytes segment(const ImageRef& image, std::span<const std::uint8_t> image_png,
                std::string_view prompt) override;

 private:
  std::map<std::pair<std::string, std::string>, RasterMask> fixtures_;
};

/// Errors: kInvalidArgument (empty prompt), kBackendUnavailable,
/// kProtocol (undecodable or wrong dimensions), kEmptyMask.
RasterMask request_auto_mask(AutoMaskClient& client, const ImageRef& image,
                             std::span<const std::uint8_t> image_png,
                             std::string_view text_prompt);

}  // namespace semprobe

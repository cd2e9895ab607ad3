// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#include "semprobe/masking.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "semprobe/error.hpp"

namespace semprobe {

RasterMask::RasterMask(int width, int height) : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    fail(ErrorCode::kInvalidArgument, "mask dimensions must be >= 1");
  }
  bits_.assign(static_cast<std::size_t>(width) * height, 0);
}

RasterMask::RasterMask(int width, int height, std::vector<std::uint8_t> bits)
    : RasterMask(width, height) {
  if (bits.size() != bits_.size()) {
    fail(ErrorCode::kInvalidArgument, "mask bit count does not match width*height");
  }
  if (std::any_of(bits.begin(), bits.end(), [](std::uint8_t b) { return b > 1; })) {
    fail(ErrorCode::kInvalidArgument, "mask bits must be 0 or 1");
  }
  bits_ = std::move(bits);
}

std::size_t RasterMask::popcount() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

namespace {

// Squared-distance test against a segment written without a division so that
// integer coordinates are decided exactly.
bool within_segment(double px, double py, PointD a, PointD b, double r2) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double ax = px - a.x;
  const double ay = py - a.y;
  const double len2 = dx * dx + dy * dy;
  const double dot = ax * dx + ay * dy;
  if (len2 == 0 || dot <= 0) return ax * ax + ay * ay <= r2;
  if (dot >= len2) {
    const double bx = px - b.x;
    const double by = py - b.y;
    return bx * bx + by * by <= r2;
  }
  const double cross = ax * dy - ay * dx;
  return cross * cross <= r2 * len2;
}

void apply_stroke(RasterMask& mask, const BrushStroke& stroke) {
  if (stroke.points.empty()) return;
  const double r = std::max(0.0, stroke.radius);
  const double r2 = r * r;
  double minx = stroke.points[0].x, maxx = minx;
  double miny = stroke.points[0].y, maxy = miny;
  for (const auto& p : stroke.points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      fail(ErrorCode::kInvalidArgument, "stroke coordinates must be finite");
    }
    minx = std::min(minx, p.x);
    maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
  }
  const int x0 = static_cast<int>(std::max(0.0, std::floor(minx - r)));
  const int y0 = static_cast<int>(std::max(0.0, std::floor(miny - r)));
  const int x1 = static_cast<int>(std::min<double>(mask.width() - 1, std::ceil(maxx + r)));
  const int y1 = static_cast<int>(std::min<double>(mask.height() - 1, std::ceil(maxy + r)));
  const bool value = stroke.mode == StrokeMode::kAdd;

  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      bool hit = false;
      if (stroke.points.size() == 1) {
        hit = within_segment(x, y, stroke.points[0], stroke.points[0], r2);
      }
      for (std::size_t i = 1; i < stroke.points.size() && !hit; ++i) {
        hit = within_segment(x, y, stroke.points[i - 1], stroke.points[i], r2);
      }
      if (hit) mask.set(x, y, value);
    }
  }
}

}  // namespace

RasterMask rasterize_strokes(std::span<const BrushStroke> strokes, int width, int height) {
  RasterMask mask(width, height);
  for (const auto& stroke : strokes) apply_stroke(mask, stroke);
  return mask;
}

RasterMask mask_from_boxes(std::span<const PixelRect> boxes, int width, int height) {
  RasterMask mask(width, height);
  for (const auto& b : boxes) {
    if (b.x1 > b.x2 || b.y1 > b.y2) {
      fail(ErrorCode::kInvalidArgument, "rectangle requires x1<=x2 and y1<=y2");
    }
    const int x0 = std::max(0, b.x1), x1 = std::min(width - 1, b.x2);
    const int y0 = std::max(0, b.y1), y1 = std::min(height - 1, b.y2);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) mask.set(x, y, true);
    }
  }
  return mask;
}

RasterMask dilate(const RasterMask& mask, int radius) {
  if (radius < 0) fail(ErrorCode::kInvalidArgument, "dilation radius must be >= 0");
  if (radius == 0) return mask;
  const int w = mask.width(), h = mask.height();
  RasterMask horizontal(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.get(x, y)) continue;
      for (int xx = std::max(0, x - radius); xx <= std::min(w - 1, x + radius); ++xx) {
        horizontal.set(xx, y, true);
      }
    }
  }
  RasterMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!horizontal.get(x, y)) continue;
      for (int yy = std::max(0, y - radius); yy <= std::min(h - 1, y + radius); ++yy) {
        out.set(x, yy, true);
      }
    }
  }
  return out;
}

std::string encode_rle(const RasterMask& mask) {
  std::string out;
  std::uint8_t current = 0;
  std::size_t run = 0;
  for (std::uint8_t bit : mask.bits()) {
    if (bit == current) {
      ++run;
      continue;
    }
    out += std::to_string(run);
    out += ';';
    current = bit;
    run = 1;
  }
  out += std::to_string(run);
  return out;
}

RasterMask decode_rle(std::string_view text, int width, int height) {
  if (width < 1 || height < 1) fail(ErrorCode::kFormat, "RLE dimensions must be >= 1");
  const auto total = static_cast<std::size_t>(width) * height;
  std::vector<std::uint8_t> bits;
  bits.reserve(total);
  std::uint8_t value = 0;
  std::size_t index = 0;
  std::size_t pos = 0;
  while (true) {
    const auto end = std::min(text.find(';', pos), text.size());
    const auto token = text.substr(pos, end - pos);
    std::size_t run = 0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), run);
    if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size()) {
      fail(ErrorCode::kFormat, "malformed RLE run '" + std::string(token) + "'");
    }
    if (run == 0 && index != 0) fail(ErrorCode::kFormat, "zero-length RLE run after the first");
    if (run > total - bits.size()) fail(ErrorCode::kFormat, "RLE runs exceed width*height");
    bits.insert(bits.end(), run, value);
    value ^= 1;
    ++index;
    if (end == text.size()) break;
    pos = end + 1;
  }
  if (bits.size() != total) fail(ErrorCode::kFormat, "RLE run total does not equal width*height");
  return RasterMask(width, height, std::move(bits));
}

Bytes mask_to_png(const RasterMask& mask) {
  GrayImage gray{mask.width(), mask.height(), {}};
  gray.pixels.reserve(mask.bits().size());
  for (auto b : mask.bits()) gray.pixels.push_back(b ? 255 : 0);
  return encode_png(gray);
}

RasterMask mask_from_png(std::span<const std::uint8_t> png) {
  const auto gray = decode_png_gray(png);
  std::vector<std::uint8_t> bits;
  bits.reserve(gray.pixels.size());
  for (auto v : gray.pixels) bits.push_back(v >= 128 ? 1 : 0);
  return RasterMask(gray.width, gray.height, std::move(bits));
}

void MockAutoMaskClient::add_fixture(const std::string& image_id, const std::string& prompt,
                                     RasterMask mask) {
  fixtures_.insert_or_assign({image_id, prompt}, std::move(mask));
}

Bytes MockAutoMaskClient::segment(const ImageRef& image, std::span<const std::uint8_t>,
                                  std::string_view prompt) {
  const auto it = fixtures_.find({image.id, std::string(prompt)});
  if (it == fixtures_.end()) return mask_to_png(RasterMask(image.width, image.height));
  return mask_to_png(it->second);
}

RasterMask request_auto_mask(AutoMaskClient& client, const ImageRef& image,
                             std::span<const std::uint8_t> image_png,
                             std::string_view text_prompt) {
  if (text_prompt.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    fail(ErrorCode::kInvalidArgument, "auto-mask prompt must be non-empty");
  }
  const auto png = client.segment(image, image_png, text_prompt);
  RasterMask mask;
  try {
    mask = mask_from_png(png);
  } catch (const Error& e) {
    fail(ErrorCode::kProtocol, std::string("auto-mask returned an undecodable mask: ") + e.what());
  }
  if (mask.width() != image.width || mask.height() != image.height) {
    fail(ErrorCode::kProtocol, "auto-mask dimensions " + std::to_string(mask.width()) + "x" +
                                   std::to_string(mask.height()) + " do not match image " +
                                   std::to_string(image.width) + "x" +
                                   std::to_string(image.height));
  }
  if (mask.empty()) fail(ErrorCode::kEmptyMask, "auto-mask returned an empty mask");
  return mask;
}

}  // namespace semprobe

// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#include "semprobe/image.hpp"

#include <png.h>

#include <cstring>

#include "semprobe/error.hpp"

namespace semprobe {
namespace {

struct PngReader {
  png_image image;

  explicit PngReader(std::span<const std::uint8_t> png) {
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (png.empty() ||
        !png_image_begin_read_from_memory(&image, png.data(), png.size())) {
      fail(ErrorCode::kFormat, std::string("invalid PNG: ") + image.message);
    }
  }
  ~PngReader() { png_image_free(&image); }
  PngReader(const PngReader&) = delete;
  PngReader& operator=(const PngReader&) = delete;

  std::vector<std::uint8_t> finish(png_uint_32 format) {
    image.format = format;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
      fail(ErrorCode::kFormat, std::string("PNG decode failed: ") + image.message);
    }
    return buf;
  }
};

Bytes write_png(int width, int height, png_uint_32 format, const std::uint8_t* data) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, data, 0, nullptr)) {
    fail(ErrorCode::kInternal, std::string("PNG encode failed: ") + image.message);
  }
  Bytes out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, data, 0, nullptr)) {
    fail(ErrorCode::kInternal, std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

}  // namespace

RgbImage decode_png_rgb(std::span<const std::uint8_t> png) {
  PngReader reader(png);
  RgbImage out;
  out.width = static_cast<int>(reader.image.width);
  out.height = static_cast<int>(reader.image.height);
  out.pixels = reader.finish(PNG_FORMAT_RGB);
  return out;
}

GrayImage decode_png_gray(std::span<const std::uint8_t> png) {
  PngReader reader(png);
  GrayImage out;
  out.width = static_cast<int>(reader.image.width);
  out.height = static_cast<int>(reader.image.height);
  out.pixels = reader.finish(PNG_FORMAT_GRAY);
  return out;
}

Bytes encode_png(const RgbImage& image) {
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
    fail(ErrorCode::kInvalidArgument, "RGB buffer size mismatch");
  }
  return write_png(image.width, image.height, PNG_FORMAT_RGB, image.pixels.data());
}

Bytes encode_png(const GrayImage& image) {
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height) {
    fail(ErrorCode::kInvalidArgument, "gray buffer size mismatch");
  }
  return write_png(image.width, image.height, PNG_FORMAT_GRAY, image.pixels.data());
}

PngSize png_size(std::span<const std::uint8_t> png) {
  PngReader reader(png);
  return {static_cast<int>(reader.image.width), static_cast<int>(reader.image.height)};
}

ImageRef make_image_ref(std::span<const std::uint8_t> png, std::string source_name) {
  const auto size = png_size(png);
  return ImageRef{sha256_hex(png), size.width, size.height, std::move(source_name)};
}

}  // namespace semprobe

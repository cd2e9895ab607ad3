// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <sstream>

#include "semprobe/catalog.hpp"
#include "semprobe/gateway.hpp"
#include "support.hpp"

namespace semprobe::testing {

/// On-disk inputs for `semprobe run`: catalog, images/, gt/, mask.png.
struct CliInputs {
  TempDir dir;
  std::filesystem::path catalog, images, gt, mask, masks;

  explicit CliInputs(int images_count = 2, int size = 64) {
    catalog = dir / "catalog.json";
    images = dir / "images";
    gt = dir / "gt";
    masks = dir / "masks";
    mask = dir / "mask.png";
    std::filesystem::create_directories(images);
    std::filesystem::create_directories(gt);
    std::filesystem::create_directories(masks);
    write_file_atomic(catalog, std::string(builtin_saw_catalog()));
    const auto m = mask_to_png(box_mask(size, size, size / 4, size / 4, size / 2, size / 2));
    write_file_atomic(mask, m);
    for (int i = 0; i < images_count; ++i) {
      const auto stem = "frame" + std::to_string(i);
      write_file_atomic(images / (stem + ".png"), make_png(size, size, i));
      write_file_atomic(gt / (stem + ".txt"), std::string("0 0.375 0.375 0.25 0.25\n"));
      write_file_atomic(masks / (stem + ".png"), m);
    }
  }

  std::vector<std::string> run_args(const std::filesystem::path& out) const {
    return {"run", "--catalog", catalog.string(), "--images", images.string(), "--gt", gt.string(),
            "--mask", mask.string(), "--out", out.string()};
  }
};

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

inline CliResult cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

inline std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace semprobe::testing

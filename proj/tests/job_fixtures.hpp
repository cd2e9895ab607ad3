// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <thread>

#include "semprobe/orchestration.hpp"
#include "support.hpp"

namespace semprobe::testing {

inline JobImage job_image(int w, int h, int variant) {
  JobImage img;
  img.png = make_png(w, h, variant);
  img.ref = make_image_ref(img.png, "frame" + std::to_string(variant) + ".png");
  img.mask = box_mask(w, h, w / 4, h / 4, w / 2, h / 2);
  img.ground_truth = parse_yolo_labels("0 0.375 0.375 0.25 0.25\n", img.ref.id, w, h);
  return img;
}

/// images x seeds x workflows with mock backends.
inline ProbeJob small_job(std::string id, int images = 2, std::vector<std::uint64_t> seeds = {1, 2, 3},
                          std::vector<std::string> workflows = {"default", "grow_mask"},
                          int samples = 2, int size = 32) {
  ProbeJob job;
  job.job_id = std::move(id);
  for (int i = 0; i < images; ++i) job.images.push_back(job_image(size, size, i));
  job.prompt = custom_prompt("a gloved hand");
  job.params = GenerationParams(0, 20, 3.5, 0.6, samples);
  job.seeds = std::move(seeds);
  job.workflow_ids = std::move(workflows);
  job.generation_backend = "mock:noise";
  job.detector_backend = "mock";
  return job;
}

/// Detector that reports one box over the bright square of every image,
/// with a confidence derived from the image hash, after an optional delay.
class SquareDetector final : public DetectorBackend {
 public:
  explicit SquareDetector(std::chrono::milliseconds delay = {}) : DetectorBackend(0), delay_(delay) {}
  std::string id() const override { return "square"; }
  RawDetections detect(std::span<const std::uint8_t> png) override {
    ++calls;
    if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
    const auto size = png_size(png);
    const auto hash = sha256_hex(png);
    const double conf = 0.3 + 0.7 * static_cast<double>(std::stoul(hash.substr(0, 4), nullptr, 16)) / 65535.0;
    const double w = size.width, h = size.height;
    return {"square-detector/1", {{0, "hand", Box{w / 4, h / 4, w / 2, h / 2}, conf}}};
  }
  std::atomic<int> calls{0};

 private:
  std::chrono::milliseconds delay_;
};

/// Generation backend that always reports the service as unreachable.
class DownBackend final : public GenerationBackend {
 public:
  DownBackend() : GenerationBackend(0) {}
  std::string id() const override { return "down"; }
  Bytes generate(const SampleRequest&) override {
    ++calls;
    fail(ErrorCode::kBackendUnavailable, "connection refused");
  }
  std::atomic<int> calls{0};
};

inline RetryPolicy instant_retry(std::atomic<int>* sleeps = nullptr) {
  RetryPolicy r;
  r.sleep = [sleeps](std::chrono::milliseconds) {
    if (sleeps) ++*sleeps;
  };
  return r;
}

}  // namespace semprobe::testing

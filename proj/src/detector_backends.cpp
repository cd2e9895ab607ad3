// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "http_util.hpp"
#include "semprobe/detection.hpp"
#include "semprobe/image.hpp"

namespace semprobe {

HttpDetector::HttpDetector(std::string base_url, std::size_t max_in_flight,
                           std::chrono::milliseconds timeout)
    : DetectorBackend(max_in_flight), base_url_(std::move(base_url)), timeout_(timeout) {}

RawDetections HttpDetector::detect(std::span<const std::uint8_t> image_png) {
  const auto ep = detail::parse_endpoint(base_url_);
  auto client = detail::make_client(ep, timeout_);
  const nlohmann::json body = {{"image", base64_encode(image_png)}};
  const auto& res = detail::expect_ok(
      client->Post(ep.base_path + "/detect", body.dump(), "application/json"), "detector");
  try {
    const auto reply = ojson::parse(res.body);
    RawDetections out;
    out.detector_id = reply.at("detector_id").get<std::string>();
    for (const auto& d : reply.at("detections")) out.detections.push_back(detection_from_json(d));
    return out;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kProtocol, std::string("detector reply malformed: ") + e.what());
  }
}

MockDetector::MockDetector(std::string detector_id)
    : DetectorBackend(0), detector_id_(std::move(detector_id)) {}

std::unique_ptr<MockDetector> MockDetector::from_fixture_file(const std::filesystem::path& path) {
  try {
    const auto doc = ojson::parse(read_text_file(path));
    auto mock = std::make_unique<MockDetector>(doc.value("detector_id", std::string("mock-detector/1")));
    for (const auto& [hash, dets] : doc.at("fixtures").items()) {
      std::vector<Detection> list;
      for (const auto& d : dets) list.push_back(detection_from_json(d));
      mock->add_fixture(hash, std::move(list));
    }
    return mock;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormat, "detector fixture file " + path.string() + ": " + e.what());
  }
}

void MockDetector::add_fixture(const std::string& image_hash, std::vector<Detection> detections) {
  std::lock_guard lock(mutex_);
  fixtures_[image_hash] = std::move(detections);
}

RawDetections MockDetector::detect(std::span<const std::uint8_t> image_png) {
  const auto hash = sha256_hex(image_png);
  std::lock_guard lock(mutex_);
  ++calls_[hash];
  RawDetections out{detector_id_, {}};
  if (const auto it = fixtures_.find(hash); it != fixtures_.end()) out.detections = it->second;
  return out;
}

std::size_t MockDetector::call_count() const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& [_, c] : calls_) n += c;
  return n;
}

std::size_t MockDetector::calls_for(const std::string& image_hash) const {
  std::lock_guard lock(mutex_);
  const auto it = calls_.find(image_hash);
  return it == calls_.end() ? 0 : it->second;
}

DetectionSet run_detector(DetectorBackend& backend, std::span<const std::uint8_t> image_png,
                          const std::string& image_id, const RetryPolicy& retry) {
  const auto size = png_size(image_png);
  auto raw = with_retry(retry, [&] {
    auto pass = backend.gate().acquire();
    return backend.detect(image_png);
  });
  if (raw.detector_id.empty()) fail(ErrorCode::kProtocol, "detector did not report an id");
  const double w = size.width, h = size.height;
  for (std::size_t i = 0; i < raw.detections.size(); ++i) {
    auto& d = raw.detections[i];
    const auto where = "detection " + std::to_string(i) + ": ";
    if (!(d.confidence >= 0 && d.confidence <= 1)) {
      fail(ErrorCode::kProtocol, where + "confidence " + std::to_string(d.confidence) + " outside [0,1]");
    }
    if (d.class_id < 0) fail(ErrorCode::kProtocol, where + "negative class_id");
    const auto& b = d.box;
    if (!std::isfinite(b.x1) || !std::isfinite(b.y1) || !std::isfinite(b.x2) ||
        !std::isfinite(b.y2) || b.x1 > b.x2 || b.y1 > b.y2) {
      fail(ErrorCode::kProtocol, where + "invalid box");
    }
    d.box = Box{std::clamp(b.x1, 0.0, w), std::clamp(b.y1, 0.0, h), std::clamp(b.x2, 0.0, w),
                std::clamp(b.y2, 0.0, h)};
  }
  return DetectionSet{image_id, std::move(raw.detections), std::move(raw.detector_id)};
}

}  // namespace semprobe

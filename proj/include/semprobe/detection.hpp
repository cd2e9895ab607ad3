// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semprobe/digest.hpp"
#include "semprobe/retry.hpp"

namespace semprobe {

using ojson = nlohmann::ordered_json;

/// Axis-aligned box in continuous pixel coordinates.
struct Box {
  double x1 = 0;
  double y1 = 0;
  double x2 = 0;
  double y2 = 0;
  double area() const noexcept { return (x2 - x1) * (y2 - y1); }
  bool operator==(const Box&) const = default;
};

struct Detection {
  int class_id = 0;
  std::string label;
  Box box;
  double confidence = 0;
  bool operator==(const Detection&) const = default;
};

struct DetectionSet {
  std::string image_id;
  std::vector<Detection> detections;
  std::string detector_id;
  bool operator==(const DetectionSet&) const = default;
};

struct GroundTruthBox {
  int class_id = 0;
  Box box;
  bool operator==(const GroundTruthBox&) const = default;
};

struct GroundTruthSet {
  std::string image_id;
  std::vector<GroundTruthBox> boxes;
  bool operator==(const GroundTruthSet&) const = default;
};

struct Thresholds {
  double conf = 0.5;
  double iou = 0.5;
  bool operator==(const Thresholds&) const = default;
};

struct Match {
  std::size_t detection = 0;    // index into DetectionSet::detections
  std::size_t ground_truth = 0; // index into GroundTruthSet::boxes
  double iou = 0;
  bool operator==(const Match&) const = default;
};

struct EvalResult {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 1;
  double recall = 1;
  double f1 = 1;
  std::vector<Match> matches;
  double conf_threshold = 0.5;
  double iou_threshold = 0.5;
  bool operator==(const EvalResult&) const = default;
};

struct BoxPair {
  std::size_t baseline = 0;
  std::size_t probe = 0;
  double iou = 0;
  double confidence_delta = 0;  // probe - baseline
  bool operator==(const BoxPair&) const = default;
};

struct ComparisonReport {
  EvalResult baseline;
  EvalResult probe;
  double delta_precision = 0;
  double delta_recall = 0;
  std::vector<BoxPair> box_pairs;
  std::size_t disappeared = 0;
  std::size_t appeared = 0;
  double mean_confidence_delta = 0;
  bool operator==(const ComparisonReport&) const = default;
};

/// Intersection over union; 0 when the union has no area.
double iou(const Box& a, const Box& b);

/// Precision/recall/F1 from counts with the empty-denominator conventions
/// (precision and recall default to 1, F1 to 0 when both are 0).
EvalResult make_eval_result(std::size_t tp, std::size_t fp, std::size_t fn, Thresholds t);

/// Greedy, class-aware, confidence-descending matching against ground truth.
/// Errors: kInvalidArgument when the image ids differ.
EvalResult evaluate(const DetectionSet& dets, const GroundTruthSet& gt, Thresholds thresholds);

/// Micro average: pooled tp/fp/fn, metrics computed once.
EvalResult evaluate_batch(std::span<const std::pair<DetectionSet, GroundTruthSet>> pairs,
                          Thresholds thresholds);

/// Baseline-vs-probe deltas plus per-box confidence deltas.
/// Errors: kInvalidArgument when the two results used different thresholds.
ComparisonReport compare(const EvalResult& baseline_eval, const DetectionSet& baseline,
                         const EvalResult& probe_eval, const DetectionSet& probe,
                         double iou_threshold);

/// Parses "class_id cx cy w h" lines (normalised to [0,1]) into pixel corners.
/// Blank lines are skipped. Throws kFormat on a malformed line.
GroundTruthSet parse_yolo_labels(std::string_view text, std::string image_id, int width,
                                 int height);

// JSON forms used by the artifacts (detections_<k>.json, comparison.json).
ojson to_json(const Detection& d);
ojson to_json(const DetectionSet& s);
ojson to_json(const GroundTruthSet& s);
ojson to_json(const EvalResult& r);
ojson to_json(const ComparisonReport& r);
Detection detection_from_json(const ojson& j);
DetectionSet detection_set_from_json(const ojson& j);
GroundTruthSet ground_truth_from_json(const ojson& j);
EvalResult eval_result_from_json(const ojson& j);
ComparisonReport comparison_from_json(const ojson& j);

// ---------------------------------------------------------------------------
// Detector backends

struct RawDetections {
  std::string detector_id;
  std::vector<Detection> detections;
};

class DetectorBackend {
 public:
  explicit DetectorBackend(std::size_t max_in_flight) : gate_(max_in_flight) {}
  virtual ~DetectorBackend() = default;
  virtual std::string id() const = 0;
  virtual RawDetections detect(std::span<const std::uint8_t> image_png) = 0;
  InFlightGate& gate() noexcept { return gate_; }

 private:
  InFlightGate gate_;
};

/// POST /detect {image: base64 PNG} -> {detector_id, detections[]}.
class HttpDetector final : public DetectorBackend {
 public:
  explicit HttpDetector(std::string base_url, std::size_t max_in_flight = 4,
                        std::chrono::milliseconds timeout = std::chrono::seconds(60));
  std::string id() const override { return base_url_; }
  RawDetections detect(std::span<const std::uint8_t> image_png) override;

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

/// Fixture detections keyed by image content hash; unknown images yield an
/// empty set. Thread-safe; counts calls per hash.
class MockDetector final : public DetectorBackend {
 public:
  explicit MockDetector(std::string detector_id = "mock-detector/1");

  /// {"detector_id": str?, "fixtures": {"<sha256>": [detection...]}}
  static std::unique_ptr<MockDetector> from_fixture_file(const std::filesystem::path& path);

  void add_fixture(const std::string& image_hash, std::vector<Detection> detections);
  std::string id() const override { return "mock"; }
  RawDetections detect(std::span<const std::uint8_t> image_png) override;

  std::size_t call_count() const;
  std::size_t calls_for(const std::string& image_hash) const;

 private:
  std::string detector_id_;
  mutable std::mutex mutex_;
  std::map<std::string, std::vector<Detection>> fixtures_;
  std::map<std::string, std::size_t> calls_;
};

/// Runs `backend` and validates/clips its reply to the image bounds.
/// Errors: kBackendUnavailable (after retries), kProtocol (malformed reply).
DetectionSet run_detector(DetectorBackend& backend, std::span<const std::uint8_t> image_png,
                          const std::string& image_id, const RetryPolicy& retry = {});

}  // namespace semprobe

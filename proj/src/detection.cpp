// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#include "semprobe/detection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "semprobe/error.hpp"

namespace semprobe {

double iou(const Box& a, const Box& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0;
  return inter / uni;
}

EvalResult make_eval_result(std::size_t tp, std::size_t fp, std::size_t fn, Thresholds t) {
  EvalResult r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.precision = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  r.recall = tp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  r.f1 = r.precision + r.recall == 0 ? 0.0
                                     : 2 * r.precision * r.recall / (r.precision + r.recall);
  r.conf_threshold = t.conf;
  r.iou_threshold = t.iou;
  return r;
}

namespace {

// Indices of detections at or above the threshold, confidence descending,
// ties by ascending index.
std::vector<std::size_t> ranked(const std::vector<Detection>& dets, double conf_threshold) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].confidence >= conf_threshold) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });
  return order;
}

}  // namespace

EvalResult evaluate(const DetectionSet& dets, const GroundTruthSet& gt, Thresholds thresholds) {
  if (dets.image_id != gt.image_id) {
    fail(ErrorCode::kInvalidArgument,
         "detections for '" + dets.image_id + "' evaluated against ground truth for '" +
             gt.image_id + "'");
  }
  const auto order = ranked(dets.detections, thresholds.conf);
  std::vector<bool> used(gt.boxes.size(), false);
  std::vector<Match> matches;
  for (auto di : order) {
    const auto& d = dets.detections[di];
    std::size_t best = gt.boxes.size();
    double best_iou = -1;
    for (std::size_t gi = 0; gi < gt.boxes.size(); ++gi) {
      if (used[gi] || gt.boxes[gi].class_id != d.class_id) continue;
      const double v = iou(d.box, gt.boxes[gi].box);
      if (v >= thresholds.iou && v > best_iou) {
        best = gi;
        best_iou = v;
      }
    }
    if (best < gt.boxes.size()) {
      used[best] = true;
      matches.push_back({di, best, best_iou});
    }
  }
  const auto tp = matches.size();
  auto result = make_eval_result(tp, order.size() - tp, gt.boxes.size() - tp, thresholds);
  result.matches = std::move(matches);
  return result;
}

EvalResult evaluate_batch(std::span<const std::pair<DetectionSet, GroundTruthSet>> pairs,
                          Thresholds thresholds) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& [dets, gt] : pairs) {
    const auto r = evaluate(dets, gt, thresholds);
    tp += r.tp;
    fp += r.fp;
    fn += r.fn;
  }
  return make_eval_result(tp, fp, fn, thresholds);
}

ComparisonReport compare(const EvalResult& baseline_eval, const DetectionSet& baseline,
                         const EvalResult& probe_eval, const DetectionSet& probe,
                         double iou_threshold) {
  if (baseline_eval.conf_threshold != probe_eval.conf_threshold ||
      baseline_eval.iou_threshold != probe_eval.iou_threshold) {
    fail(ErrorCode::kInvalidArgument, "baseline and probe were evaluated with different thresholds");
  }
  ComparisonReport report;
  report.baseline = baseline_eval;
  report.probe = probe_eval;
  report.delta_precision = probe_eval.precision - baseline_eval.precision;
  report.delta_recall = probe_eval.recall - baseline_eval.recall;

  const auto base_order = ranked(baseline.detections, baseline_eval.conf_threshold);
  const auto probe_order = ranked(probe.detections, probe_eval.conf_threshold);
  std::vector<bool> used(probe.detections.size(), false);
  double delta_sum = 0;
  for (auto bi : base_order) {
    const auto& b = baseline.detections[bi];
    std::size_t best = probe.detections.size();
    double best_iou = -1;
    for (auto pi : probe_order) {
      if (used[pi] || probe.detections[pi].class_id != b.class_id) continue;
      const double v = iou(b.box, probe.detections[pi].box);
      if (v >= iou_threshold && (v > best_iou || (v == best_iou && pi < best))) {
        best = pi;
        best_iou = v;
      }
    }
    if (best == probe.detections.size()) continue;
    used[best] = true;
    const double delta = probe.detections[best].confidence - b.confidence;
    report.box_pairs.push_back({bi, best, best_iou, delta});
    delta_sum += delta;
  }
  report.disappeared = base_order.size() - report.box_pairs.size();
  report.appeared = probe_order.size() - report.box_pairs.size();
  report.mean_confidence_delta =
      report.box_pairs.empty() ? 0.0 : delta_sum / static_cast<double>(report.box_pairs.size());
  return report;
}

GroundTruthSet parse_yolo_labels(std::string_view text, std::string image_id, int width,
                                 int height) {
  GroundTruthSet gt{std::move(image_id), {}};
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    int cls = -1;
    double cx, cy, w, h;
    std::string extra;
    if (!(fields >> cls >> cx >> cy >> w >> h) || (fields >> extra) || cls < 0 || w < 0 ||
        h < 0) {
      fail(ErrorCode::kFormat, "ground-truth line " + std::to_string(line_no) +
                                   " is not 'class_id cx cy w h': " + line);
    }
    auto clip = [](double v, double hi) { return std::clamp(v, 0.0, hi); };
    Box box{clip((cx - w / 2) * width, width), clip((cy - h / 2) * height, height),
            clip((cx + w / 2) * width, width), clip((cy + h / 2) * height, height)};
    gt.boxes.push_back({cls, box});
  }
  return gt;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

ojson box_json(const Box& b) { return {{"x1", b.x1}, {"y1", b.y1}, {"x2", b.x2}, {"y2", b.y2}}; }

Box box_from(const ojson& j) {
  return {j.at("x1").get<double>(), j.at("y1").get<double>(), j.at("x2").get<double>(),
          j.at("y2").get<double>()};
}

}  // namespace

ojson to_json(const Detection& d) {
  ojson j;
  j["class_id"] = d.class_id;
  j["label"] = d.label;
  j["x1"] = d.box.x1;
  j["y1"] = d.box.y1;
  j["x2"] = d.box.x2;
  j["y2"] = d.box.y2;
  j["confidence"] = d.confidence;
  return j;
}

Detection detection_from_json(const ojson& j) {
  Detection d;
  d.class_id = j.at("class_id").get<int>();
  d.label = j.value("label", std::string());
  d.box = box_from(j);
  d.confidence = j.at("confidence").get<double>();
  return d;
}

ojson to_json(const DetectionSet& s) {
  ojson j;
  j["image_id"] = s.image_id;
  j["detector_id"] = s.detector_id;
  j["detections"] = ojson::array();
  for (const auto& d : s.detections) j["detections"].push_back(to_json(d));
  return j;
}

DetectionSet detection_set_from_json(const ojson& j) {
  DetectionSet s;
  s.image_id = j.at("image_id").get<std::string>();
  s.detector_id = j.at("detector_id").get<std::string>();
  for (const auto& d : j.at("detections")) s.detections.push_back(detection_from_json(d));
  return s;
}

ojson to_json(const GroundTruthSet& s) {
  ojson j;
  j["image_id"] = s.image_id;
  j["boxes"] = ojson::array();
  for (const auto& b : s.boxes) {
    ojson jb = box_json(b.box);
    jb["class_id"] = b.class_id;
    j["boxes"].push_back(std::move(jb));
  }
  return j;
}

GroundTruthSet ground_truth_from_json(const ojson& j) {
  GroundTruthSet s;
  s.image_id = j.at("image_id").get<std::string>();
  for (const auto& b : j.at("boxes")) s.boxes.push_back({b.at("class_id").get<int>(), box_from(b)});
  return s;
}

ojson to_json(const EvalResult& r) {
  ojson j;
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["fn"] = r.fn;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["conf_threshold"] = r.conf_threshold;
  j["iou_threshold"] = r.iou_threshold;
  j["matches"] = ojson::array();
  for (const auto& m : r.matches) {
    j["matches"].push_back({{"detection", m.detection}, {"ground_truth", m.ground_truth}, {"iou", m.iou}});
  }
  return j;
}

EvalResult eval_result_from_json(const ojson& j) {
  EvalResult r;
  r.tp = j.at("tp").get<std::size_t>();
  r.fp = j.at("fp").get<std::size_t>();
  r.fn = j.at("fn").get<std::size_t>();
  r.precision = j.at("precision").get<double>();
  r.recall = j.at("recall").get<double>();
  r.f1 = j.at("f1").get<double>();
  r.conf_threshold = j.at("conf_threshold").get<double>();
  r.iou_threshold = j.at("iou_threshold").get<double>();
  for (const auto& m : j.at("matches")) {
    r.matches.push_back({m.at("detection").get<std::size_t>(),
                         m.at("ground_truth").get<std::size_t>(), m.at("iou").get<double>()});
  }
  return r;
}

ojson to_json(const ComparisonReport& r) {
  ojson j;
  j["baseline"] = to_json(r.baseline);
  j["probe"] = to_json(r.probe);
  j["delta_precision"] = r.delta_precision;
  j["delta_recall"] = r.delta_recall;
  j["box_pairs"] = ojson::array();
  for (const auto& p : r.box_pairs) {
    j["box_pairs"].push_back({{"baseline", p.baseline},
                              {"probe", p.probe},
                              {"iou", p.iou},
                              {"confidence_delta", p.confidence_delta}});
  }
  j["disappeared"] = r.disappeared;
  j["appeared"] = r.appeared;
  j["mean_confidence_delta"] = r.mean_confidence_delta;
  return j;
}

ComparisonReport comparison_from_json(const ojson& j) {
  ComparisonReport r;
  r.baseline = eval_result_from_json(j.at("baseline"));
  r.probe = eval_result_from_json(j.at("probe"));
  r.delta_precision = j.at("delta_precision").get<double>();
  r.delta_recall = j.at("delta_recall").get<double>();
  for (const auto& p : j.at("box_pairs")) {
    r.box_pairs.push_back({p.at("baseline").get<std::size_t>(), p.at("probe").get<std::size_t>(),
                           p.at("iou").get<double>(), p.at("confidence_delta").get<double>()});
  }
  r.disappeared = j.at("disappeared").get<std::size_t>();
  r.appeared = j.at("appeared").get<std::size_t>();
  r.mean_confidence_delta = j.at("mean_confidence_delta").get<double>();
  return r;
}

}  // namespace semprobe

// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

// Brute-force reference implementations shared by the unit tests and the
// acceptance runner. They deliberately avoid calling the code under test.

#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "semprobe/detection.hpp"
#include "semprobe/masking.hpp"

namespace semprobe::oracle {

inline double box_iou(const Box& a, const Box& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
  return uni <= 0 ? 0.0 : inter / uni;
}

struct MatchOutcome {
  std::size_t tp = 0, fp = 0, fn = 0;
  std::vector<Match> matches;
};

// Selection order by repeated arg-max, then a per-detection scan over unused GT.
inline MatchOutcome greedy_match(const DetectionSet& dets, const GroundTruthSet& gt, Thresholds t) {
  std::vector<bool> taken(dets.detections.size(), false);
  std::vector<std::size_t> order;
  for (;;) {
    std::size_t best = dets.detections.size();
    for (std::size_t i = 0; i < dets.detections.size(); ++i) {
      if (taken[i] || dets.detections[i].confidence < t.conf) continue;
      if (best == dets.detections.size() || dets.detections[i].confidence > dets.detections[best].confidence) best = i;
    }
    if (best == dets.detections.size()) break;
    taken[best] = true;
    order.push_back(best);
  }
  MatchOutcome out;
  std::vector<bool> used(gt.boxes.size(), false);
  for (auto d : order) {
    std::size_t pick = gt.boxes.size();
    double pick_iou = 0;
    for (std::size_t g = 0; g < gt.boxes.size(); ++g) {
      if (used[g] || gt.boxes[g].class_id != dets.detections[d].class_id) continue;
      const double v = box_iou(dets.detections[d].box, gt.boxes[g].box);
      if (v < t.iou) continue;
      if (pick == gt.boxes.size() || v > pick_iou) {
        pick = g;
        pick_iou = v;
      }
    }
    if (pick == gt.boxes.size()) {
      ++out.fp;
    } else {
      used[pick] = true;
      ++out.tp;
      out.matches.push_back({d, pick, pick_iou});
    }
  }
  out.fn = gt.boxes.size() - out.tp;
  return out;
}

struct Instance {
  DetectionSet dets;
  GroundTruthSet gt;
};

// Integer-cornered boxes, two classes, a coarse confidence grid (ties and
// exact-threshold values are common) and detections that are jittered copies
// of ground truth, so IoU values near the threshold show up often.
inline Instance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_boxes(0, 6), pos(0, 40), size(1, 20), jitter(-4, 4),
      cls(0, 1), conf_step(0, 10), coin(0, 2);
  Instance inst;
  inst.dets.image_id = inst.gt.image_id = "img";
  inst.dets.detector_id = "oracle";
  const int ng = n_boxes(rng), nd = n_boxes(rng);
  for (int i = 0; i < ng; ++i) {
    const int x = pos(rng), y = pos(rng);
    inst.gt.boxes.push_back({cls(rng), Box{double(x), double(y), double(x + size(rng)), double(y + size(rng))}});
  }
  for (int i = 0; i < nd; ++i) {
    Box b;
    if (!inst.gt.boxes.empty() && coin(rng) != 0) {
      const auto& src = inst.gt.boxes[std::uniform_int_distribution<std::size_t>(0, inst.gt.boxes.size() - 1)(rng)].box;
      const double x1 = src.x1 + jitter(rng), y1 = src.y1 + jitter(rng);
      b = Box{x1, y1, std::max(x1 + 1, src.x2 + jitter(rng)), std::max(y1 + 1, src.y2 + jitter(rng))};
    } else {
      const int x = pos(rng), y = pos(rng);
      b = Box{double(x), double(y), double(x + size(rng)), double(y + size(rng))};
    }
    inst.dets.detections.push_back({cls(rng), "hand", b, conf_step(rng) / 10.0});
  }
  return inst;
}

// Exact point-to-segment test on integer coordinates with radius k/2.
inline bool oracle_hit(std::int64_t px, std::int64_t py, std::int64_t ax, std::int64_t ay, std::int64_t bx,
                std::int64_t by, std::int64_t k) {
  const std::int64_t k2 = k * k;
  const std::int64_t dx = bx - ax, dy = by - ay;
  const std::int64_t len2 = dx * dx + dy * dy;
  const std::int64_t dot = (px - ax) * dx + (py - ay) * dy;
  if (len2 == 0 || dot <= 0) {
    const auto ex = px - ax, ey = py - ay;
    return 4 * (ex * ex + ey * ey) <= k2;
  }
  if (dot >= len2) {
    const auto ex = px - bx, ey = py - by;
    return 4 * (ex * ex + ey * ey) <= k2;
  }
  const std::int64_t cross = (px - ax) * dy - (py - ay) * dx;
  return static_cast<__int128>(4) * cross * cross <= static_cast<__int128>(k2) * len2;
}

struct IntStroke {
  std::vector<std::pair<int, int>> points;
  int half_radius;  // radius = half_radius / 2
  bool add;
};

inline RasterMask oracle_rasterize(const std::vector<IntStroke>& strokes, int w, int h) {
  RasterMask m(w, h);
  for (const auto& s : strokes) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        bool hit = false;
        if (s.points.size() == 1) {
          hit = oracle_hit(x, y, s.points[0].first, s.points[0].second, s.points[0].first,
                           s.points[0].second, s.half_radius);
        }
        for (std::size_t i = 1; i < s.points.size() && !hit; ++i) {
          hit = oracle_hit(x, y, s.points[i - 1].first, s.points[i - 1].second, s.points[i].first,
                           s.points[i].second, s.half_radius);
        }
        if (hit) m.set(x, y, s.add);
      }
    }
  }
  return m;
}

inline std::vector<IntStroke> random_strokes(std::mt19937_64& rng, int w, int h) {
  std::uniform_int_distribution<int> count(1, 4), npts(1, 5), coord_x(-4, w + 3),
      coord_y(-4, h + 3), half(0, 16), mode(0, 3);
  std::vector<IntStroke> out(static_cast<std::size_t>(count(rng)));
  for (auto& s : out) {
    const int n = npts(rng);
    for (int i = 0; i < n; ++i) s.points.emplace_back(coord_x(rng), coord_y(rng));
    s.half_radius = half(rng);
    s.add = mode(rng) != 0;
  }
  return out;
}

inline std::vector<BrushStroke> to_brush(const std::vector<IntStroke>& strokes) {
  std::vector<BrushStroke> out;
  for (const auto& s : strokes) {
    BrushStroke b;
    for (auto [x, y] : s.points) b.points.push_back({double(x), double(y)});
    b.radius = s.half_radius / 2.0;
    b.mode = s.add ? StrokeMode::kAdd : StrokeMode::kErase;
    out.push_back(b);
  }
  return out;
}

inline RasterMask dilate_oracle(const RasterMask& m, int r) {
  RasterMask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      bool any = false;
      for (int dy = -r; dy <= r && !any; ++dy) {
        for (int dx = -r; dx <= r && !any; ++dx) any = m.contains(x + dx, y + dy) && m.get(x + dx, y + dy);
      }
      out.set(x, y, any);
    }
  }
  return out;
}

// Independent reference, written from the published algorithm.
inline std::uint64_t ref_splitmix(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace semprobe::oracle

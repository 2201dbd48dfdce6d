#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>
#include <vector>

#include "stsearch/error.hpp"
#include "stsearch/image.hpp"
#include "stsearch/taxonomy.hpp"

namespace stsearch {

// Continuous pixel-frame box, origin top-left.
struct BoundingBox {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }

  bool valid() const {
    return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
           std::isfinite(y_max) && x_min < x_max && y_min < y_max;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct Detection {
  BoundingBox box;
  HighClassId class_id = 0;
  double score = 0;
  std::string detector_id;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct DetectionSet {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<Detection> detections;
};

inline double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  return (w <= 0 || h <= 0) ? 0.0 : w * h;
}

inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

// Priority order used by suppression: score descending, then lower x_min,
// lower y_min, and lexicographic detector id.
inline bool higher_priority(const Detection& a, const Detection& b) {
  return std::tie(b.score, a.box.x_min, a.box.y_min, a.detector_id) <
         std::tie(a.score, b.box.x_min, b.box.y_min, b.detector_id);
}

// Greedy per-class non-maximum suppression. A detection survives iff its IoU
// with every already-kept detection of its class is below the threshold.
inline std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold) {
  if (!(iou_threshold > 0 && iou_threshold < 1))
    fail(ErrorKind::kUsage, "iou threshold must lie in (0,1)");
  std::stable_sort(dets.begin(), dets.end(), higher_priority);
  std::vector<Detection> kept;
  for (auto& d : dets) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return k.class_id == d.class_id && iou(k.box, d.box) >= iou_threshold;
    });
    if (!suppressed) kept.push_back(std::move(d));
  }
  return kept;
}

// Pools the outputs of several detectors run on one image and suppresses
// duplicates across them.
inline DetectionSet fuse_ensemble(const std::vector<DetectionSet>& sets, double iou_threshold) {
  DetectionSet out;
  if (sets.empty()) return out;
  out.image_id = sets.front().image_id;
  out.width = sets.front().width;
  out.height = sets.front().height;
  std::vector<Detection> all;
  for (const auto& s : sets) {
    if (s.image_id != out.image_id || s.width != out.width || s.height != out.height)
      fail(ErrorKind::kData, "ensemble inputs describe different images");
    all.insert(all.end(), s.detections.begin(), s.detections.end());
  }
  out.detections = nms(std::move(all), iou_threshold);
  return out;
}

// Clamps a box into [0,width]x[0,height]; returns false if nothing remains.
inline bool clamp_box(BoundingBox& box, int width, int height) {
  box.x_min = std::clamp(box.x_min, 0.0, static_cast<double>(width));
  box.x_max = std::clamp(box.x_max, 0.0, static_cast<double>(width));
  box.y_min = std::clamp(box.y_min, 0.0, static_cast<double>(height));
  box.y_max = std::clamp(box.y_max, 0.0, static_cast<double>(height));
  return box.valid();
}

// Integer pixel rectangle covering the box, rounded outward and clamped.
inline PixelRect pixel_rect(const BoundingBox& box, int width, int height) {
  PixelRect r;
  r.x0 = std::max(0, static_cast<int>(std::floor(box.x_min)));
  r.y0 = std::max(0, static_cast<int>(std::floor(box.y_min)));
  r.x1 = std::min(width, static_cast<int>(std::ceil(box.x_max)));
  r.y1 = std::min(height, static_cast<int>(std::ceil(box.y_max)));
  return r;
}

inline Image crop(const Image& image, const BoundingBox& box) {
  if (image.empty()) fail(ErrorKind::kUsage, "cannot crop an empty image");
  const PixelRect r = pixel_rect(box, image.width(), image.height());
  if (r.empty()) fail(ErrorKind::kData, "box lies entirely outside the image");
  return subimage(image, r);
}

// Gender of the person box covering the largest fraction of the garment.
// Coverage is intersection over garment area; below 0.5 the answer is unknown.
inline Gender assign_gender(const Detection& apparel, const std::vector<Detection>& persons,
                            const Taxonomy& taxonomy, double min_coverage = 0.5) {
  const double area = apparel.box.area();
  if (area <= 0) return Gender::kUnknown;
  Gender best = Gender::kUnknown;
  double best_cover = -1;
  double best_score = -1;
  for (const auto& p : persons) {
    const Gender g = taxonomy.person_gender(p.class_id);
    if (g == Gender::kUnknown) continue;
    const double cover = intersection_area(apparel.box, p.box) / area;
    if (cover > best_cover || (cover == best_cover && p.score > best_score)) {
      best_cover = cover;
      best_score = p.score;
      best = g;
    }
  }
  return best_cover >= min_coverage ? best : Gender::kUnknown;
}

}  // namespace stsearch

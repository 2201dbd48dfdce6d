#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "stsearch/evaluation.hpp"
#include "stsearch/geometry.hpp"

namespace fixture {

using namespace stsearch;

inline BoundingBox random_box(std::mt19937_64& rng, double extent = 20.0) {
  std::uniform_real_distribution<double> u(0.0, extent);
  double x0 = u(rng), x1 = u(rng), y0 = u(rng), y1 = u(rng);
  if (x0 > x1) std::swap(x0, x1);
  if (y0 > y1) std::swap(y0, y1);
  return {x0, y0, x1 + 1.0, y1 + 1.0};
}

inline BoundingBox jitter(std::mt19937_64& rng, const BoundingBox& b, double amount) {
  std::uniform_real_distribution<double> u(-amount, amount);
  BoundingBox o{b.x_min + u(rng), b.y_min + u(rng), b.x_max + u(rng), b.y_max + u(rng)};
  if (o.x_max <= o.x_min) o.x_max = o.x_min + 0.5;
  if (o.y_max <= o.y_min) o.y_max = o.y_min + 0.5;
  return o;
}

// Boxes that overlap often: a few seeds, each jittered into a cluster.
inline std::vector<Detection> random_detections(std::mt19937_64& rng, std::size_t n, int classes,
                                                bool distinct_scores) {
  std::uniform_int_distribution<int> cls(0, classes - 1);
  std::uniform_int_distribution<int> coarse(0, 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<BoundingBox> seeds;
  for (int i = 0; i < 3; ++i) seeds.push_back(random_box(rng));
  std::vector<double> scores(n);
  if (distinct_scores) {
    std::iota(scores.begin(), scores.end(), 1.0);
    std::shuffle(scores.begin(), scores.end(), rng);
    for (auto& s : scores) s /= double(n + 1);
  } else {
    for (auto& s : scores) s = coarse(rng) / 4.0;  // frequent ties
  }
  std::vector<Detection> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = seeds[std::uniform_int_distribution<std::size_t>(0, seeds.size() - 1)(rng)];
    const BoundingBox b = u(rng) < 0.8 ? jitter(rng, s, 3.0) : random_box(rng);
    out.push_back({b, cls(rng), scores[i], "det" + std::to_string(i % 3)});
  }
  return out;
}

struct ApFixture {
  std::vector<ScoredDetection> dets;
  std::vector<GroundTruthBox> gts;
};

// Up to max_dets detections and max_gts ground truth boxes of one class spread
// over two images. Detections mostly jitter a ground truth box so matches,
// duplicates and misses all occur. Scores are distinct.
inline ApFixture random_ap_fixture(std::mt19937_64& rng, std::size_t max_dets, std::size_t max_gts,
                                   HighClassId cls = 0) {
  std::uniform_int_distribution<std::size_t> nd(0, max_dets), ng(1, max_gts);
  std::uniform_int_distribution<int> img(0, 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ApFixture f;
  const std::size_t g = ng(rng);
  for (std::size_t i = 0; i < g; ++i)
    f.gts.push_back({img(rng) ? "b" : "a", cls, random_box(rng)});
  const std::size_t d = nd(rng);
  std::vector<double> scores(d);
  std::iota(scores.begin(), scores.end(), 1.0);
  std::shuffle(scores.begin(), scores.end(), rng);
  for (std::size_t i = 0; i < d; ++i) {
    ScoredDetection s;
    if (u(rng) < 0.7) {
      const auto& gt = f.gts[std::uniform_int_distribution<std::size_t>(0, g - 1)(rng)];
      s.image_id = u(rng) < 0.9 ? gt.image_id : (gt.image_id == "a" ? "b" : "a");
      s.det.box = jitter(rng, gt.box, 2.0);
    } else {
      s.image_id = img(rng) ? "b" : "a";
      s.det.box = random_box(rng);
    }
    s.det.class_id = cls;
    s.det.score = scores[i] / double(d + 1);
    s.det.detector_id = "d";
    f.dets.push_back(std::move(s));
  }
  return f;
}

}  // namespace fixture

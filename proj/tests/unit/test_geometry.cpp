#include <algorithm>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "stsearch/geometry.hpp"
#include "test_util.hpp"

using namespace stsearch;

namespace {

Detection det(double x0, double y0, double x1, double y1, double score, int cls = 0,
              std::string id = "d") {
  return {{x0, y0, x1, y1}, cls, score, std::move(id)};
}

// Counts unit cells of an integer grid covered by both boxes.
double raster_iou(const BoundingBox& a, const BoundingBox& b) {
  int inter = 0, uni = 0;
  for (int y = -40; y < 40; ++y)
    for (int x = -40; x < 40; ++x) {
      const double cx = x + 0.5, cy = y + 0.5;
      const bool ia = cx > a.x_min && cx < a.x_max && cy > a.y_min && cy < a.y_max;
      const bool ib = cx > b.x_min && cx < b.x_max && cy > b.y_min && cy < b.y_max;
      inter += ia && ib;
      uni += ia || ib;
    }
  return uni ? double(inter) / uni : 0.0;
}

// Reference suppression: walk detections in priority order; a detection is
// kept iff no earlier kept detection of its class overlaps it at or above
// the threshold. Written independently of nms() with index bookkeeping.
std::vector<Detection> suppression_oracle(const std::vector<Detection>& dets, double thr) {
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& p = dets[a];
    const auto& q = dets[b];
    if (p.score != q.score) return p.score > q.score;
    if (p.box.x_min != q.box.x_min) return p.box.x_min < q.box.x_min;
    if (p.box.y_min != q.box.y_min) return p.box.y_min < q.box.y_min;
    if (p.detector_id != q.detector_id) return p.detector_id < q.detector_id;
    return a < b;
  });
  std::vector<bool> alive(dets.size(), true);
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (!alive[order[i]]) continue;
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const auto& a = dets[order[i]];
      const auto& b = dets[order[j]];
      if (alive[order[j]] && a.class_id == b.class_id && iou(a.box, b.box) >= thr)
        alive[order[j]] = false;
    }
  }
  std::vector<Detection> out;
  for (auto i : order)
    if (alive[i]) out.push_back(dets[i]);
  return out;
}

}  // namespace

TEST(Iou, Basics) {
  const BoundingBox a{0, 0, 10, 10};
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou(a, {20, 20, 30, 30}), 0.0);
  EXPECT_NEAR(iou(a, {5, 5, 15, 15}), 25.0 / 175.0, 1e-12);
}

TEST(Iou, AgreesWithRasterOracleOnIntegerBoxes) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> c(-30, 30), s(1, 9);
  for (int t = 0; t < 500; ++t) {
    BoundingBox a, b;
    a.x_min = c(rng); a.y_min = c(rng); a.x_max = a.x_min + s(rng); a.y_max = a.y_min + s(rng);
    b.x_min = c(rng); b.y_min = c(rng); b.x_max = b.x_min + s(rng); b.y_max = b.y_min + s(rng);
    EXPECT_NEAR(iou(a, b), raster_iou(a, b), 1e-12);
    EXPECT_DOUBLE_EQ(iou(a, b), iou(b, a));
    EXPECT_GE(iou(a, b), 0.0);
    EXPECT_LE(iou(a, b), 1.0);
  }
}

TEST(Nms, PairThresholds) {
  // iou((0,0,10,10),(0,0,10,6)) = 60/100 = 0.6
  std::vector<Detection> d{det(0, 0, 10, 10, 0.9, 0, "a"), det(0, 0, 10, 6, 0.8, 0, "b")};
  ASSERT_NEAR(iou(d[0].box, d[1].box), 0.6, 1e-12);
  auto k = nms(d, 0.5);
  ASSERT_EQ(k.size(), 1u);
  EXPECT_EQ(k[0].detector_id, "a");
  EXPECT_EQ(nms(d, 0.7).size(), 2u);
}

TEST(Nms, PerClass) {
  std::vector<Detection> d{det(0, 0, 10, 10, 0.9, 0), det(0, 0, 10, 10, 0.8, 1)};
  EXPECT_EQ(nms(d, 0.5).size(), 2u);
}

TEST(Nms, ThresholdOutsideOpenIntervalIsUsageError) {
  EXPECT_ERROR_KIND(nms({}, 0.0), ErrorKind::kUsage);
  EXPECT_ERROR_KIND(nms({}, 1.0), ErrorKind::kUsage);
}

TEST(Nms, TieBreakIsDeterministic) {
  std::vector<Detection> d{det(1, 0, 11, 10, 0.5, 0, "x"), det(0, 0, 10, 10, 0.5, 0, "y")};
  auto k = nms(d, 0.5);
  ASSERT_EQ(k.size(), 1u);
  EXPECT_EQ(k[0].detector_id, "y");  // lower x_min wins
  std::reverse(d.begin(), d.end());
  EXPECT_EQ(nms(d, 0.5), k);
}

TEST(Nms, PropertiesOnRandomInputs) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 50);
  std::uniform_int_distribution<int> n(0, 12), cls(0, 2);
  for (int t = 0; t < 500; ++t) {
    std::vector<Detection> d;
    const int count = n(rng);
    for (int i = 0; i < count; ++i) {
      const double x = u(rng), y = u(rng);
      d.push_back(det(x, y, x + 1 + u(rng) / 2, y + 1 + u(rng) / 2, std::floor(u(rng)) / 50,
                      cls(rng), "d" + std::to_string(i % 3)));
    }
    const double thr = 0.3 + 0.4 * (t % 5) / 4.0;
    const auto kept = nms(d, thr);
    EXPECT_EQ(kept, suppression_oracle(d, thr));
    EXPECT_LE(kept.size(), d.size());
    for (std::size_t i = 0; i < kept.size(); ++i)
      for (std::size_t j = i + 1; j < kept.size(); ++j)
        if (kept[i].class_id == kept[j].class_id) {
          EXPECT_LT(iou(kept[i].box, kept[j].box), thr);
        }
    EXPECT_EQ(nms(kept, thr), kept);  // idempotent
    auto shuffled = d;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_EQ(nms(shuffled, thr), kept);  // order independent
  }
}

TEST(Ensemble, SingletonEqualsNms) {
  DetectionSet s{"img", 100, 100, {det(0, 0, 10, 10, 0.9), det(1, 1, 10, 10, 0.7)}};
  EXPECT_EQ(fuse_ensemble({s}, 0.5).detections, nms(s.detections, 0.5));
}

TEST(Ensemble, IdenticalBoxesCollapseToHigherScore) {
  DetectionSet a{"img", 100, 100, {det(0, 0, 10, 10, 0.9, 0, "A")}};
  DetectionSet b{"img", 100, 100, {det(0, 0, 10, 10, 0.8, 0, "B")}};
  auto f = fuse_ensemble({a, b}, 0.5);
  ASSERT_EQ(f.detections.size(), 1u);
  EXPECT_DOUBLE_EQ(f.detections[0].score, 0.9);
  EXPECT_EQ(f.detections[0].detector_id, "A");
}

TEST(Ensemble, DisjointBoxesUnion) {
  DetectionSet a{"img", 100, 100, {det(0, 0, 10, 10, 0.9, 0, "A")}};
  DetectionSet b{"img", 100, 100, {det(50, 50, 60, 60, 0.8, 0, "B")}};
  EXPECT_EQ(fuse_ensemble({a, b}, 0.5).detections.size(), 2u);
}

TEST(Ensemble, MismatchedImagesRejected) {
  DetectionSet a{"img", 100, 100, {}};
  DetectionSet b{"other", 100, 100, {}};
  EXPECT_ERROR_KIND(fuse_ensemble({a, b}, 0.5), ErrorKind::kData);
  EXPECT_TRUE(fuse_ensemble({}, 0.5).detections.empty());
}

TEST(Crop, FullImageIsIdentity) {
  Image im(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) im.at(x, y) = {std::uint8_t(x), std::uint8_t(y), 7};
  EXPECT_EQ(crop(im, {0, 0, 8, 8}), im);
  const auto p = crop(im, {2, 2, 4, 4});
  ASSERT_EQ(p.width(), 2);
  ASSERT_EQ(p.height(), 2);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) EXPECT_EQ(p.at(x, y), im.at(x + 2, y + 2));
}

TEST(Crop, ClampsAtEdges) {
  Image im(8, 8);
  const auto p = crop(im, {6, 0, 12, 8});
  EXPECT_EQ(p.width(), 2);
  EXPECT_EQ(p.height(), 8);
  EXPECT_ERROR_KIND(crop(im, {9, 9, 12, 12}), ErrorKind::kData);
}

TEST(Crop, ClampBox) {
  BoundingBox b{-5, 2, 20, 30};
  EXPECT_TRUE(clamp_box(b, 10, 10));
  EXPECT_EQ(b, (BoundingBox{0, 2, 10, 10}));
  BoundingBox out{12, 12, 15, 15};
  EXPECT_FALSE(clamp_box(out, 10, 10));
}

TEST(Gender, Assignment) {
  const auto t = default_taxonomy();
  const int woman = t.high_id("woman"), man = t.high_id("man"), boy = t.high_id("boy");
  const Detection apparel = det(10, 10, 20, 20, 0.9, t.high_id("top"));
  EXPECT_EQ(assign_gender(apparel, {det(0, 0, 50, 50, 0.9, woman)}, t), Gender::kWoman);
  EXPECT_EQ(assign_gender(apparel, {}, t), Gender::kUnknown);
  // man covers 0.9 of the garment, boy 0.6
  const Detection m = det(10, 10, 20, 19, 0.5, man);
  const Detection b = det(10, 14, 20, 20, 0.99, boy);
  ASSERT_NEAR(intersection_area(apparel.box, m.box) / apparel.box.area(), 0.9, 1e-12);
  ASSERT_NEAR(intersection_area(apparel.box, b.box) / apparel.box.area(), 0.6, 1e-12);
  EXPECT_EQ(assign_gender(apparel, {b, m}, t), Gender::kMan);
  // below half coverage nothing is assigned
  EXPECT_EQ(assign_gender(apparel, {det(10, 10, 20, 14, 0.9, woman)}, t), Gender::kUnknown);
}

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "stsearch/geometry.hpp"
#include "stsearch/image.hpp"
#include "stsearch/taxonomy.hpp"

// Procedural fixtures: a small synthetic apparel catalog on white
// backgrounds and a repository of smooth "natural" background images.
namespace stsearch::demo {

inline constexpr int kImageSize = 96;

inline const std::array<Rgb, 12>& palette() {
  static const std::array<Rgb, 12> colors = {{
      {200, 30, 30},   {30, 70, 190},   {40, 150, 60},  {230, 200, 40},
      {120, 40, 150},  {240, 130, 30},  {20, 20, 20},   {140, 140, 140},
      {30, 160, 170},  {220, 90, 150},  {110, 70, 40},  {20, 40, 90},
  }};
  return colors;
}

enum class Pattern { kSolid, kHStripes, kVStripes, kChecks, kDots };
inline constexpr int kPatternCount = 5;

struct GarmentSpec {
  std::string fine_class;
  std::string high_class;
  int color = 0;       // palette index
  int accent = 0;      // palette index used by the pattern
  Pattern pattern = Pattern::kSolid;
  int jitter_x = 0;
  int jitter_y = 0;
};

// Silhouette test in garment-local unit coordinates (u,v in [0,1]).
inline bool in_silhouette(const std::string& cls, double u, double v) {
  if (cls == "t-shirt") return (v < 0.35) || (u > 0.22 && u < 0.78);
  if (cls == "tank-top") return u > 0.15 && u < 0.85 && (v > 0.15 || u < 0.35 || u > 0.65);
  if (cls == "hoodie") return (u > 0.1 && u < 0.9) || v < 0.8;
  if (cls == "blazer") return !(v < 0.45 && std::abs(u - 0.5) < 0.45 * (0.45 - v));
  if (cls == "jeans" || cls == "leggings") {
    const double gap = cls == "jeans" ? 0.12 : 0.06;
    return v < 0.3 || std::abs(u - 0.5) > gap;
  }
  if (cls == "shorts") return v < 0.4 || std::abs(u - 0.5) > 0.1;
  if (cls == "mini-skirt") return std::abs(u - 0.5) < 0.3 + 0.2 * v;
  return true;
}

// Garment footprint (width, height) in pixels per class.
inline std::pair<int, int> footprint(const std::string& cls) {
  if (cls == "t-shirt") return {64, 60};
  if (cls == "tank-top") return {44, 64};
  if (cls == "hoodie") return {60, 70};
  if (cls == "blazer") return {56, 72};
  if (cls == "jeans") return {44, 76};
  if (cls == "leggings") return {36, 78};
  if (cls == "shorts") return {52, 40};
  if (cls == "mini-skirt") return {56, 44};
  return {48, 48};
}

inline Rgb pattern_color(const GarmentSpec& g, int lx, int ly) {
  const Rgb base = palette()[g.color];
  const Rgb acc = palette()[g.accent];
  switch (g.pattern) {
    case Pattern::kSolid: return base;
    case Pattern::kHStripes: return (ly / 6) % 2 ? acc : base;
    case Pattern::kVStripes: return (lx / 6) % 2 ? acc : base;
    case Pattern::kChecks: return ((lx / 8) + (ly / 8)) % 2 ? acc : base;
    case Pattern::kDots: {
      const int cx = lx % 10 - 5, cy = ly % 10 - 5;
      return cx * cx + cy * cy <= 5 ? acc : base;
    }
  }
  return base;
}

struct RenderedGarment {
  Image image;
  BoundingBox box;  // tight box around the garment
};

inline RenderedGarment render_garment(const GarmentSpec& g) {
  Image im(kImageSize, kImageSize, {255, 255, 255});
  const auto [w, h] = footprint(g.fine_class);
  const int x0 = (kImageSize - w) / 2 + g.jitter_x;
  const int y0 = (kImageSize - h) / 2 + g.jitter_y;
  int bx0 = kImageSize, by0 = kImageSize, bx1 = 0, by1 = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double u = (x + 0.5) / w, v = (y + 0.5) / h;
      if (!in_silhouette(g.fine_class, u, v)) continue;
      im.at(x0 + x, y0 + y) = pattern_color(g, x, y);
      bx0 = std::min(bx0, x0 + x);
      by0 = std::min(by0, y0 + y);
      bx1 = std::max(bx1, x0 + x + 1);
      by1 = std::max(by1, y0 + y + 1);
    }
  return {im, {double(bx0), double(by0), double(bx1), double(by1)}};
}

// Smooth colour field: a tinted base plus a few low-frequency waves and
// fine noise, loosely resembling out-of-focus scenery.
inline Image render_background(int width, int height, std::uint64_t seed, int min_level = 40,
                               int max_level = 230) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::array<double, 3> base;
  for (auto& b : base) b = min_level + unit(rng) * (max_level - min_level);
  struct Wave {
    double fx, fy, phase;
    std::array<double, 3> amp;
  };
  std::vector<Wave> waves(4);
  for (auto& w : waves) {
    w.fx = (unit(rng) - 0.5) * 0.15;
    w.fy = (unit(rng) - 0.5) * 0.15;
    w.phase = unit(rng) * 6.283185307179586;
    for (auto& a : w.amp) a = (unit(rng) - 0.5) * 50;
  }
  Image im(width, height);
  std::normal_distribution<double> noise(0.0, 4.0);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      std::array<double, 3> c = base;
      for (const auto& w : waves) {
        const double s = std::sin(w.fx * x + w.fy * y + w.phase);
        for (int k = 0; k < 3; ++k) c[k] += w.amp[k] * s;
      }
      auto q = [&](double v) {
        return static_cast<std::uint8_t>(std::clamp(std::lround(v + noise(rng)), 0L, 255L));
      };
      im.at(x, y) = {q(c[0]), q(c[1]), q(c[2])};
    }
  return im;
}

struct DemoItem {
  std::string item_id;
  GarmentSpec garment;
  Gender gender = Gender::kWoman;
  double priority = 0;
};

inline const std::vector<std::string>& demo_fine_classes() {
  static const std::vector<std::string> classes = {"t-shirt", "tank-top", "hoodie", "blazer",
                                                   "jeans",   "leggings", "shorts", "mini-skirt"};
  return classes;
}

// `count` items spread evenly over the demo classes and two genders; within
// a class every (colour, accent, pattern) combination is distinct.
inline std::vector<DemoItem> make_demo_items(const Taxonomy& t, int count = 200,
                                             std::uint64_t seed = 2024) {
  std::mt19937_64 rng(seed);
  const auto& classes = demo_fine_classes();
  std::vector<DemoItem> items;
  std::vector<std::vector<std::array<int, 3>>> used(classes.size());
  for (int i = 0; i < count; ++i) {
    const std::size_t c = static_cast<std::size_t>(i) % classes.size();
    GarmentSpec g;
    g.fine_class = classes[c];
    g.high_class = t.high(t.fine(t.fine_id(g.fine_class)).parent).name;
    for (;;) {
      g.color = static_cast<int>(rng() % palette().size());
      g.pattern = static_cast<Pattern>(rng() % kPatternCount);
      g.accent = g.pattern == Pattern::kSolid
                     ? g.color
                     : static_cast<int>((g.color + 1 + rng() % (palette().size() - 1)) %
                                        palette().size());
      const std::array<int, 3> key{g.color, g.accent, static_cast<int>(g.pattern)};
      if (std::find(used[c].begin(), used[c].end(), key) == used[c].end()) {
        used[c].push_back(key);
        break;
      }
    }
    g.jitter_x = static_cast<int>(rng() % 9) - 4;
    g.jitter_y = static_cast<int>(rng() % 7) - 3;
    DemoItem item;
    char id[16];
    std::snprintf(id, sizeof id, "item%04d", i);
    item.item_id = id;
    item.garment = g;
    item.gender = (i / static_cast<int>(classes.size())) % 2 ? Gender::kMan : Gender::kWoman;
    item.priority = static_cast<double>(rng() % 1000) / 10.0;
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace stsearch::demo

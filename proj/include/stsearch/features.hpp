#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "stsearch/error.hpp"
#include "stsearch/image.hpp"

namespace stsearch {

inline constexpr int kFeatureDim = 512;
inline constexpr int kTaskFeatureDim = 128;

// Pre-projection descriptor, the stand-in for a backbone's pooled output.
using RawFeature = std::vector<double>;

struct Embedding {
  std::vector<float> base;                                    // unit L2 norm
  std::map<std::string, std::vector<float>> task_features;   // 128-D each
};

enum class DistanceMetric { kCosine };

template <typename T>
double dot(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) fail(ErrorKind::kUsage, "dimension mismatch");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

template <typename T>
double l2_norm(std::span<const T> v) {
  return std::sqrt(dot(v, v));
}

template <typename T>
std::vector<T> normalize(std::span<const T> v) {
  const double n = l2_norm(v);
  if (!(n > 0)) fail(ErrorKind::kData, "cannot normalize a zero vector");
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<T>(v[i] / n);
  return out;
}

template <typename T>
std::vector<T> normalize(const std::vector<T>& v) {
  return normalize(std::span<const T>(v));
}

// 1 - <a,b> for unit vectors; rejects inputs whose norm is off by more than tol.
template <typename T>
double cosine_distance(std::span<const T> a, std::span<const T> b, double tol = 1e-4) {
  if (std::abs(l2_norm(a) - 1.0) > tol || std::abs(l2_norm(b) - 1.0) > tol)
    fail(ErrorKind::kData, "cosine distance needs unit vectors");
  return std::clamp(1.0 - dot(a, b), 0.0, 2.0);
}

template <typename T>
double cosine_distance(const std::vector<T>& a, const std::vector<T>& b, double tol = 1e-4) {
  return cosine_distance(std::span<const T>(a), std::span<const T>(b), tol);
}

namespace featurizer {

inline constexpr int kGrid = 3;
inline constexpr int kHueBins = 32;
inline constexpr int kSatBins = 8;
inline constexpr int kValBins = 8;
inline constexpr int kGradBins = 8;
inline constexpr int kCellDim = kHueBins + kSatBins + kValBins + kGradBins;  // 56
inline constexpr int kHistDim = kGrid * kGrid * kCellDim;                    // 504
inline constexpr int kGlobalDim = 8;
static_assert(kHistDim + kGlobalDim == kFeatureDim);

// Gradient magnitudes below this (in 8-bit intensity units) are ignored so
// smooth shading does not populate the orientation histogram.
inline constexpr double kGradientFloor = 4.0;

struct Hsv {
  double h;  // degrees [0,360)
  double s;  // [0,1]
  double v;  // [0,1]
};

inline Hsv to_hsv(Rgb p) {
  const int mx = std::max({p.r, p.g, p.b});
  const int mn = std::min({p.r, p.g, p.b});
  const double delta = mx - mn;
  Hsv out{0.0, mx == 0 ? 0.0 : delta / mx, mx / 255.0};
  if (delta > 0) {
    double h;
    if (mx == p.r)
      h = 60.0 * std::fmod((p.g - p.b) / delta + 6.0, 6.0);
    else if (mx == p.g)
      h = 60.0 * ((p.b - p.r) / delta + 2.0);
    else
      h = 60.0 * ((p.r - p.g) / delta + 4.0);
    out.h = h >= 360.0 ? h - 360.0 : h;
  }
  return out;
}

inline int bin_of(double x, double range, int bins) {
  return std::clamp(static_cast<int>(std::floor(x / range * bins)), 0, bins - 1);
}

// Cell i of n spans [floor(i*len/n), floor((i+1)*len/n)).
inline int cell_start(int i, int len) { return i * len / kGrid; }

inline double gray(const Image& im, int x, int y) {
  x = std::clamp(x, 0, im.width() - 1);
  y = std::clamp(y, 0, im.height() - 1);
  const Rgb& p = im.at(x, y);
  return (p.r + p.g + p.b) / 3.0;
}

inline void normalize_l1(std::span<double> h) {
  double s = 0;
  for (double v : h) s += v;
  if (s > 0)
    for (double& v : h) v /= s;
}

}  // namespace featurizer

// Deterministic 512-D colour/texture descriptor: a 3x3 grid of per-cell
// HSV and gradient-orientation histograms (each L1-normalised) followed by
// per-channel mean and standard deviation, aspect ratio and a zero pad.
inline RawFeature baseline_featurize(const Image& patch) {
  using namespace featurizer;
  if (patch.empty()) fail(ErrorKind::kData, "cannot featurize an empty patch");
  RawFeature f(kFeatureDim, 0.0);
  const int w = patch.width();
  const int h = patch.height();

  for (int cy = 0; cy < kGrid; ++cy) {
    for (int cx = 0; cx < kGrid; ++cx) {
      double* cell = f.data() + (cy * kGrid + cx) * kCellDim;
      double* hue = cell;
      double* sat = hue + kHueBins;
      double* val = sat + kSatBins;
      double* grad = val + kValBins;
      for (int y = cell_start(cy, h); y < cell_start(cy + 1, h); ++y) {
        for (int x = cell_start(cx, w); x < cell_start(cx + 1, w); ++x) {
          const Hsv c = to_hsv(patch.at(x, y));
          hue[bin_of(c.h, 360.0, kHueBins)] += 1;
          sat[bin_of(c.s, 1.0, kSatBins)] += 1;
          val[bin_of(c.v, 1.0, kValBins)] += 1;
          const double gx = (gray(patch, x + 1, y) - gray(patch, x - 1, y)) / 2.0;
          const double gy = (gray(patch, x, y + 1) - gray(patch, x, y - 1)) / 2.0;
          const double mag = std::hypot(gx, gy);
          if (mag >= kGradientFloor) {
            double theta = std::atan2(gy, gx);
            if (theta < 0) theta += std::numbers::pi;
            if (theta >= std::numbers::pi) theta -= std::numbers::pi;
            grad[bin_of(theta, std::numbers::pi, kGradBins)] += mag;
          }
        }
      }
      normalize_l1({hue, kHueBins});
      normalize_l1({sat, kSatBins});
      normalize_l1({val, kValBins});
      normalize_l1({grad, kGradBins});
    }
  }

  std::array<double, 3> sum{}, sq{};
  for (const Rgb& p : patch.pixels()) {
    const double c[3] = {p.r / 255.0, p.g / 255.0, p.b / 255.0};
    for (int k = 0; k < 3; ++k) {
      sum[k] += c[k];
      sq[k] += c[k] * c[k];
    }
  }
  const double n = static_cast<double>(patch.pixels().size());
  double* global = f.data() + kHistDim;
  for (int k = 0; k < 3; ++k) {
    const double mean = sum[k] / n;
    global[k] = mean;
    global[3 + k] = std::sqrt(std::max(0.0, sq[k] / n - mean * mean));
  }
  global[6] = static_cast<double>(w) / h;
  global[7] = 0.0;
  return f;
}

}  // namespace stsearch

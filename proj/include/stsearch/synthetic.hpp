#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "stsearch/features.hpp"

namespace stsearch::synthetic {

// Raw features built from a strong product-type prototype, a weak color
// prototype and isotropic noise. Product type is easy to learn; color is
// present but buried under the noise unless a head is trained on it.
struct ColorCorpusParams {
  int product_types = 4;
  int colors = 4;
  std::size_t samples = 2000;
  double type_scale = 3.0;
  double color_scale = 1.0;
  double noise_sigma = 0.15;
  std::uint64_t seed = 7;
};

struct ColorSample {
  RawFeature feature;
  int product_type = 0;
  int color = 0;
};

inline std::vector<double> random_unit(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(dim);
  double s = 0;
  for (auto& x : v) {
    x = n(rng);
    s += x * x;
  }
  for (auto& x : v) x /= std::sqrt(s);
  return v;
}

// Sample i has product type i % P and color (i / P) % C, so every
// (type, color) cell is equally populated.
inline std::vector<ColorSample> make_color_corpus(const ColorCorpusParams& p = {}) {
  std::mt19937_64 rng(p.seed);
  std::vector<std::vector<double>> types, colors;
  for (int t = 0; t < p.product_types; ++t) types.push_back(random_unit(rng, kFeatureDim));
  for (int c = 0; c < p.colors; ++c) colors.push_back(random_unit(rng, kFeatureDim));
  std::normal_distribution<double> noise(0.0, p.noise_sigma);
  std::vector<ColorSample> out;
  out.reserve(p.samples);
  for (std::size_t i = 0; i < p.samples; ++i) {
    ColorSample s;
    s.product_type = static_cast<int>(i % p.product_types);
    s.color = static_cast<int>((i / p.product_types) % p.colors);
    s.feature.resize(kFeatureDim);
    for (std::size_t d = 0; d < kFeatureDim; ++d)
      s.feature[d] = p.type_scale * types[s.product_type][d] +
                     p.color_scale * colors[s.color][d] + noise(rng);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace stsearch::synthetic

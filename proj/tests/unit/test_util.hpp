#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "stsearch/error.hpp"

// Asserts that `stmt` throws stsearch::Error of the given kind.
#define EXPECT_ERROR_KIND(stmt, expected_kind)                                  \
  do {                                                                          \
    bool caught_ = false;                                                       \
    try {                                                                       \
      stmt;                                                                     \
    } catch (const ::stsearch::Error& e_) {                                     \
      caught_ = true;                                                           \
      EXPECT_EQ(e_.kind(), expected_kind) << e_.what();                         \
    }                                                                           \
    EXPECT_TRUE(caught_) << #stmt " did not throw";                             \
  } while (0)

namespace testutil {

inline std::vector<float> random_unit_f(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(dim);
  double s = 0;
  for (auto& x : v) {
    x = n(rng);
    s += x * x;
  }
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(v[i] / std::sqrt(s));
  // renormalise in float so unit checks at float precision pass
  double t = 0;
  for (float x : out) t += double(x) * x;
  for (auto& x : out) x = static_cast<float>(x / std::sqrt(t));
  return out;
}

}  // namespace testutil

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <vector>

#include "stsearch/error.hpp"
#include "stsearch/geometry.hpp"
#include "stsearch/image.hpp"

namespace stsearch {

struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;  // 1 = foreground

  BinaryMask() = default;
  BinaryMask(int w, int h, bool value = false)
      : width(w), height(h), bits(static_cast<std::size_t>(w) * h, value ? 1 : 0) {}

  bool get(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v = true) {
    bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0;
  }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

// Background iff every channel is at least the threshold.
inline BinaryMask white_threshold_mask(const Image& image, int threshold) {
  if (image.empty()) fail(ErrorKind::kData, "cannot mask an empty image");
  BinaryMask m(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const Rgb& p = image.at(x, y);
      const bool white = p.r >= threshold && p.g >= threshold && p.b >= threshold;
      m.set(x, y, !white);
    }
  return m;
}

// Tight box around the non-white pixels, or the whole frame when the
// image is entirely white.
inline BoundingBox foreground_box(const Image& image, int threshold = 240) {
  const BinaryMask m = white_threshold_mask(image, threshold);
  int x0 = m.width, y0 = m.height, x1 = 0, y1 = 0;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      if (m.get(x, y)) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x + 1);
        y1 = std::max(y1, y + 1);
      }
  if (x1 == 0) return {0, 0, double(image.width()), double(image.height())};
  return {double(x0), double(y0), double(x1), double(y1)};
}

// Square structuring element of side 2r+1, applied as a row pass followed
// by a column pass.
inline BinaryMask dilate(const BinaryMask& mask, int radius) {
  if (radius < 0) fail(ErrorKind::kUsage, "dilation radius must be >= 0");
  if (radius == 0) return mask;
  BinaryMask rows(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y) {
    int last = -1'000'000;  // most recent set x at or left of the current column + r
    for (int x = 0; x < mask.width + radius; ++x) {
      if (x < mask.width && mask.get(x, y)) last = x;
      const int cx = x - radius;
      if (cx >= 0 && cx < mask.width && last >= cx - radius) rows.set(cx, y);
    }
  }
  BinaryMask out(mask.width, mask.height);
  for (int x = 0; x < mask.width; ++x) {
    int last = -1'000'000;
    for (int y = 0; y < mask.height + radius; ++y) {
      if (y < mask.height && rows.get(x, y)) last = y;
      const int cy = y - radius;
      if (cy >= 0 && cy < mask.height && last >= cy - radius) out.set(x, cy);
    }
  }
  return out;
}

// Keeps only the largest 4-connected foreground component (first in raster
// order on ties).
inline BinaryMask largest_component(const BinaryMask& mask) {
  std::vector<int> label(mask.bits.size(), -1);
  std::size_t best_size = 0;
  int best_label = -1;
  int next = 0;
  std::deque<int> queue;
  for (int start = 0; start < static_cast<int>(mask.bits.size()); ++start) {
    if (!mask.bits[start] || label[start] >= 0) continue;
    std::size_t size = 0;
    label[start] = next;
    queue.push_back(start);
    while (!queue.empty()) {
      const int p = queue.front();
      queue.pop_front();
      ++size;
      const int x = p % mask.width, y = p / mask.width;
      const int nbrs[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& n : nbrs) {
        if (n[0] < 0 || n[1] < 0 || n[0] >= mask.width || n[1] >= mask.height) continue;
        const int q = n[1] * mask.width + n[0];
        if (mask.bits[q] && label[q] < 0) {
          label[q] = next;
          queue.push_back(q);
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best_label = next;
    }
    ++next;
  }
  BinaryMask out(mask.width, mask.height);
  if (best_label < 0) return out;
  for (std::size_t i = 0; i < label.size(); ++i)
    if (label[i] == best_label) out.bits[i] = 1;
  return out;
}

// Uniformly picks an image large enough, then a random rectangle of at least
// min_width x min_height inside it.
inline Image sample_background(const std::vector<Image>& repo, int min_width, int min_height,
                               std::uint64_t seed) {
  if (repo.empty()) fail(ErrorKind::kData, "background repository is empty");
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < repo.size(); ++i)
    if (repo[i].width() >= min_width && repo[i].height() >= min_height) eligible.push_back(i);
  if (eligible.empty()) fail(ErrorKind::kData, "no background image is large enough");
  std::mt19937_64 rng(seed);
  auto uniform = [&](int lo, int hi) {  // inclusive
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };
  const Image& src = repo[eligible[rng() % eligible.size()]];
  const int w = uniform(min_width, src.width());
  const int h = uniform(min_height, src.height());
  const int x0 = uniform(0, src.width() - w);
  const int y0 = uniform(0, src.height() - h);
  return subimage(src, {x0, y0, x0 + w, y0 + h});
}

struct BlendRequest {
  Image source;       // catalog image g
  Image target;       // background f*
  BinaryMask mask;    // same size as source
  int offset_x = 0;   // target-frame position of the mask origin
  int offset_y = 0;
};

// Unclamped per-channel solution in the target frame.
struct BlendSolution {
  int width = 0;
  int height = 0;
  std::array<std::vector<double>, 3> channels;
  std::size_t unknowns = 0;
  int iterations = 0;           // max over channels
  double relative_residual = 0; // max over channels
};

// Interior of the placed mask: set pixels whose four neighbours are all set.
// These are the unknowns; every other pixel keeps its target value.
inline std::vector<int> blend_domain(const BlendRequest& req) {
  const auto& m = req.mask;
  std::vector<int> index(static_cast<std::size_t>(m.width) * m.height, -1);
  int n = 0;
  for (int y = 1; y + 1 < m.height; ++y)
    for (int x = 1; x + 1 < m.width; ++x)
      if (m.get(x, y) && m.get(x - 1, y) && m.get(x + 1, y) && m.get(x, y - 1) &&
          m.get(x, y + 1))
        index[static_cast<std::size_t>(y) * m.width + x] = n++;
  return index;
}

namespace detail {

struct CgResult {
  int iterations = 0;
  double relative_residual = 0;
  bool converged = false;
};

// Conjugate gradient for A x = b with A applied matrix-free.
template <typename Apply>
CgResult conjugate_gradient(Apply&& apply, const std::vector<double>& b, std::vector<double>& x,
                            double tol, int max_iters) {
  const std::size_t n = b.size();
  auto dotp = [](const std::vector<double>& u, const std::vector<double>& v) {
    double s = 0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
  };
  CgResult res;
  const double b_norm = std::sqrt(dotp(b, b));
  if (b_norm == 0) {
    std::fill(x.begin(), x.end(), 0.0);
    res.converged = true;
    return res;
  }
  std::vector<double> r(n), q(n);
  apply(x, q);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
  std::vector<double> p = r;
  double rr = dotp(r, r);
  res.relative_residual = std::sqrt(rr) / b_norm;
  while (res.relative_residual > tol && res.iterations < max_iters) {
    apply(p, q);
    const double alpha = rr / dotp(p, q);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
    }
    const double rr_new = dotp(r, r);
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + (rr_new / rr) * p[i];
    rr = rr_new;
    ++res.iterations;
    res.relative_residual = std::sqrt(rr) / b_norm;
  }
  res.converged = res.relative_residual <= tol;
  return res;
}

}  // namespace detail

inline void check_blend_request(const BlendRequest& req) {
  if (req.mask.width != req.source.width() || req.mask.height != req.source.height())
    fail(ErrorKind::kUsage, "mask and source sizes differ");
  if (req.offset_x < 0 || req.offset_y < 0 ||
      req.offset_x + req.mask.width > req.target.width() ||
      req.offset_y + req.mask.height > req.target.height())
    fail(ErrorKind::kUsage, "mask region does not fit inside the target");
}

// Gradient-domain paste of the source into the target over the mask
// interior: for every unknown p,
//   4 f_p - sum_{q in N_p, q unknown} f_q
//       = sum_{q in N_p, q known} f*_q + sum_{q in N_p} (g_p - g_q),
// solved per channel by conjugate gradient to ||r|| / ||b|| <= tol.
inline BlendSolution poisson_solve(const BlendRequest& req, double tol = 1e-8,
                                   int max_iters = -1) {
  check_blend_request(req);
  const auto domain = blend_domain(req);
  const int mw = req.mask.width;
  std::vector<int> px, py;  // mask-frame coordinates of unknowns
  for (std::size_t i = 0; i < domain.size(); ++i)
    if (domain[i] >= 0) {
      px.push_back(static_cast<int>(i) % mw);
      py.push_back(static_cast<int>(i) / mw);
    }
  const std::size_t n = px.size();
  if (max_iters < 0) max_iters = static_cast<int>(std::max<std::size_t>(10 * n, 1));

  BlendSolution sol;
  sol.width = req.target.width();
  sol.height = req.target.height();
  sol.unknowns = n;

  std::vector<std::array<int, 4>> nbr(n);
  constexpr int dx[4] = {-1, 1, 0, 0};
  constexpr int dy[4] = {0, 0, -1, 1};
  for (std::size_t k = 0; k < n; ++k)
    for (int d = 0; d < 4; ++d)
      nbr[k][d] = domain[static_cast<std::size_t>(py[k] + dy[d]) * mw + px[k] + dx[d]];

  auto apply = [&](const std::vector<double>& x, std::vector<double>& out) {
    for (std::size_t k = 0; k < n; ++k) {
      double v = 4.0 * x[k];
      for (int d = 0; d < 4; ++d)
        if (nbr[k][d] >= 0) v -= x[nbr[k][d]];
      out[k] = v;
    }
  };

  for (int c = 0; c < 3; ++c) {
    auto& plane = sol.channels[c];
    plane.resize(static_cast<std::size_t>(sol.width) * sol.height);
    for (int y = 0; y < sol.height; ++y)
      for (int x = 0; x < sol.width; ++x)
        plane[static_cast<std::size_t>(y) * sol.width + x] = req.target.channel(x, y, c);
    if (n == 0) continue;

    std::vector<double> b(n, 0.0), x(n);
    for (std::size_t k = 0; k < n; ++k) {
      const int sx = px[k], sy = py[k];
      const double gp = req.source.channel(sx, sy, c);
      for (int d = 0; d < 4; ++d) {
        b[k] += gp - req.source.channel(sx + dx[d], sy + dy[d], c);
        if (nbr[k][d] < 0)
          b[k] += req.target.channel(req.offset_x + sx + dx[d], req.offset_y + sy + dy[d], c);
      }
      x[k] = req.target.channel(req.offset_x + sx, req.offset_y + sy, c);
    }
    const auto cg = detail::conjugate_gradient(apply, b, x, tol, max_iters);
    sol.iterations = std::max(sol.iterations, cg.iterations);
    sol.relative_residual = std::max(sol.relative_residual, cg.relative_residual);
    if (!cg.converged)
      fail(ErrorKind::kConvergence, "poisson solve hit the iteration limit with residual " +
                                        std::to_string(cg.relative_residual));
    for (std::size_t k = 0; k < n; ++k)
      plane[static_cast<std::size_t>(req.offset_y + py[k]) * sol.width + req.offset_x + px[k]] =
          x[k];
  }
  return sol;
}

// Rounds and clamps a solution into displayable 8-bit range.
inline Image to_image(const BlendSolution& sol) {
  Image out(sol.width, sol.height);
  auto q = [](double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  };
  for (int y = 0; y < sol.height; ++y)
    for (int x = 0; x < sol.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * sol.width + x;
      out.at(x, y) = {q(sol.channels[0][i]), q(sol.channels[1][i]), q(sol.channels[2][i])};
    }
  return out;
}

inline Image poisson_blend(const BlendRequest& req, double tol = 1e-8, int max_iters = -1) {
  return to_image(poisson_solve(req, tol, max_iters));
}

struct AugmentOptions {
  int threshold = 240;
  int dilate_radius = 3;
  double min_white_fraction = 0.2;
  double tol = 1e-8;
};

struct AugmentResult {
  Image image;
  bool passed_through = false;
  std::string warning;
};

// Replaces the white catalog background with a random natural patch:
// white threshold, largest component, dilation, background draw, Poisson blend.
inline AugmentResult augment_catalog_image(const Image& image, const std::vector<Image>& repo,
                                           std::uint64_t seed, const AugmentOptions& opt = {}) {
  AugmentResult out;
  const BinaryMask raw = white_threshold_mask(image, opt.threshold);
  const double white = 1.0 - static_cast<double>(raw.count()) / raw.bits.size();
  if (white < opt.min_white_fraction) {
    out.image = image;
    out.passed_through = true;
    out.warning = "background is not predominantly white; image left unchanged";
    return out;
  }
  const BinaryMask mask = dilate(largest_component(raw), opt.dilate_radius);
  const Image patch = sample_background(repo, std::max(1, image.width() / 2),
                                        std::max(1, image.height() / 2), seed);
  BlendRequest req{image, resize_nearest(patch, image.width(), image.height()), mask, 0, 0};
  if (mask.count() == 0) {
    out.image = req.target;
    return out;
  }
  out.image = poisson_blend(req, opt.tol);
  return out;
}

}  // namespace stsearch

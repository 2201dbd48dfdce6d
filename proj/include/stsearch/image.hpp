#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stsearch/error.hpp"

namespace stsearch {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Interleaved 8-bit RGB raster, row-major, origin top-left.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = {})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) fail(ErrorKind::kUsage, "negative image size");
    pixels_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }

  Rgb& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  const Rgb& at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

  std::uint8_t channel(int x, int y, int c) const {
    const Rgb& p = at(x, y);
    return c == 0 ? p.r : (c == 1 ? p.g : p.b);
  }

  const std::vector<Rgb>& pixels() const { return pixels_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Rgb> pixels_;
};

// Axis-aligned integer pixel rectangle, half-open [x0,x1) x [y0,y1).
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

inline Image subimage(const Image& src, PixelRect r) {
  Image out(r.width(), r.height());
  for (int y = 0; y < r.height(); ++y)
    for (int x = 0; x < r.width(); ++x) out.at(x, y) = src.at(r.x0 + x, r.y0 + y);
  return out;
}

// Nearest-neighbour resample.
inline Image resize_nearest(const Image& src, int width, int height) {
  if (src.empty()) fail(ErrorKind::kUsage, "cannot resize an empty image");
  Image out(width, height);
  for (int y = 0; y < height; ++y) {
    const int sy = static_cast<int>(static_cast<long long>(y) * src.height() / height);
    for (int x = 0; x < width; ++x) {
      const int sx = static_cast<int>(static_cast<long long>(x) * src.width() / width);
      out.at(x, y) = src.at(sx, sy);
    }
  }
  return out;
}

// Replicates every pixel into a factor x factor block.
inline Image upscale_replicate(const Image& src, int factor) {
  Image out(src.width() * factor, src.height() * factor);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) out.at(x, y) = src.at(x / factor, y / factor);
  return out;
}

}  // namespace stsearch

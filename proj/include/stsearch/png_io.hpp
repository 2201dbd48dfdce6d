#pragma once

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "stsearch/error.hpp"
#include "stsearch/image.hpp"

namespace stsearch {

namespace detail {
struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace detail

// Reads any PNG libpng understands and converts it to 8-bit RGB.
inline Image read_png(const std::filesystem::path& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail(ErrorKind::kData, "cannot open " + path.string());

  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_stdio(&img, fp.get()))
    fail(ErrorKind::kData, "not a PNG: " + path.string() + " (" + img.message + ")");
  img.format = PNG_FORMAT_RGB;
  Image out(static_cast<int>(img.width), static_cast<int>(img.height));
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    fail(ErrorKind::kData, "corrupt PNG: " + path.string() + " (" + img.message + ")");
  }
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) {
      const auto* p = &buf[(static_cast<std::size_t>(y) * out.width() + x) * 3];
      out.at(x, y) = {p[0], p[1], p[2]};
    }
  return out;
}

inline void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.empty()) fail(ErrorKind::kUsage, "cannot write an empty image");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_RGB;
  static_assert(sizeof(Rgb) == 3);
  const auto* data = reinterpret_cast<const png_byte*>(image.pixels().data());
  if (!png_image_write_to_file(&img, path.c_str(), 0, data, 0, nullptr))
    fail(ErrorKind::kData, "cannot write PNG " + path.string() + " (" + img.message + ")");
}

}  // namespace stsearch

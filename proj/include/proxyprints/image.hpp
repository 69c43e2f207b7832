#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "proxyprints/detail/mathx.hpp"
#include "proxyprints/errors.hpp"

namespace proxyprints {

// Canonical working resolution of the pipeline. Other sizes are resampled
// on ingest.
inline constexpr int kCanonicalSize = 256;
inline constexpr int kCanonicalDpi = 500;

// 8-bit grayscale raster. Convention: 0 = ridge (dark), 255 = background.
struct GrayImage {
  int width = 0;
  int height = 0;
  int dpi = kCanonicalDpi;
  std::vector<std::uint8_t> pixels;  // row-major, width*height

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 255, int dots_per_inch = kCanonicalDpi)
      : width(w), height(h), dpi(dots_per_inch), pixels(std::size_t(w) * h, fill) {}

  std::uint8_t at(int x, int y) const { return pixels[std::size_t(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[std::size_t(y) * width + x]; }

  bool in_bounds(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height;
  }

  // clamped access for filters running over the border
  std::uint8_t at_clamped(int x, int y) const {
    x = std::clamp(x, 0, width - 1);
    y = std::clamp(y, 0, height - 1);
    return at(x, y);
  }

  double bilinear(double x, double y, double background = 255.0) const {
    if (x < -1 || y < -1 || x > width || y > height) return background;
    int x0 = int(std::floor(x)), y0 = int(std::floor(y));
    double fx = x - x0, fy = y - y0;
    auto sample = [&](int sx, int sy) -> double {
      return in_bounds(sx, sy) ? double(at(sx, sy)) : background;
    };
    double top = sample(x0, y0) * (1 - fx) + sample(x0 + 1, y0) * fx;
    double bot = sample(x0, y0 + 1) * (1 - fx) + sample(x0 + 1, y0 + 1) * fx;
    return top * (1 - fy) + bot * fy;
  }

  bool operator==(const GrayImage& o) const {
    return width == o.width && height == o.height && pixels == o.pixels;
  }
};

// 8-bit RGB raster for rendered template images.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, 3 bytes per pixel

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(std::size_t(w) * h * 3, 0) {}

  std::uint8_t* px(int x, int y) { return &pixels[(std::size_t(y) * width + x) * 3]; }
  const std::uint8_t* px(int x, int y) const { return &pixels[(std::size_t(y) * width + x) * 3]; }
  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
};

inline void validate(const GrayImage& img) {
  if (img.width < 64 || img.height < 64)
    throw InvalidArgument("image must be at least 64x64, got " + std::to_string(img.width) +
                          "x" + std::to_string(img.height));
  if (img.pixels.size() != std::size_t(img.width) * img.height)
    throw InvalidArgument("pixel buffer size does not match dimensions");
}

// ---------------------------------------------------------------------------
// PNG I/O (libpng)

namespace detail {

struct PngReadCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* fp = nullptr;
  ~PngReadCloser() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

struct PngWriteCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* fp = nullptr;
  ~PngWriteCloser() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};

}  // namespace detail

// Reads any 8/16-bit gray/palette/RGB(A) PNG and collapses it to 8-bit
// luminance.
inline GrayImage read_png_gray(const std::string& path) {
  detail::PngReadCloser c;
  c.fp = std::fopen(path.c_str(), "rb");
  if (!c.fp) throw IoError("cannot open PNG for reading: " + path);
  c.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!c.png) throw IoError("png_create_read_struct failed");
  c.info = png_create_info_struct(c.png);
  if (!c.info) throw IoError("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(c.png))) throw IoError("libpng failed to decode: " + path);

  png_init_io(c.png, c.fp);
  png_read_info(c.png, c.info);

  png_set_strip_16(c.png);
  png_set_strip_alpha(c.png);
  png_set_palette_to_rgb(c.png);
  png_set_expand_gray_1_2_4_to_8(c.png);
  int color_type = png_get_color_type(c.png, c.info);
  if (color_type & PNG_COLOR_MASK_COLOR)
    png_set_rgb_to_gray(c.png, PNG_ERROR_ACTION_NONE, -1, -1);
  png_read_update_info(c.png, c.info);

  GrayImage img;
  img.width = int(png_get_image_width(c.png, c.info));
  img.height = int(png_get_image_height(c.png, c.info));
  img.pixels.resize(std::size_t(img.width) * img.height);

  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y) rows[y] = img.pixels.data() + std::size_t(y) * img.width;
  png_read_image(c.png, rows.data());
  png_read_end(c.png, nullptr);
  return img;
}

inline void write_png(const GrayImage& img, const std::string& path) {
  detail::PngWriteCloser c;
  c.fp = std::fopen(path.c_str(), "wb");
  if (!c.fp) throw IoError("cannot open PNG for writing: " + path);
  c.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!c.png) throw IoError("png_create_write_struct failed");
  c.info = png_create_info_struct(c.png);
  if (!c.info) throw IoError("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(c.png))) throw IoError("libpng failed to encode: " + path);

  png_init_io(c.png, c.fp);
  png_set_IHDR(c.png, c.info, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(c.png, c.info);
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(img.pixels.data() + std::size_t(y) * img.width);
  png_write_image(c.png, rows.data());
  png_write_end(c.png, nullptr);
}

inline void write_png(const RgbImage& img, const std::string& path) {
  detail::PngWriteCloser c;
  c.fp = std::fopen(path.c_str(), "wb");
  if (!c.fp) throw IoError("cannot open PNG for writing: " + path);
  c.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!c.png) throw IoError("png_create_write_struct failed");
  c.info = png_create_info_struct(c.png);
  if (!c.info) throw IoError("png_create_info_struct failed");
  if (setjmp(png_jmpbuf(c.png))) throw IoError("libpng failed to encode: " + path);

  png_init_io(c.png, c.fp);
  png_set_IHDR(c.png, c.info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(c.png, c.info);
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(img.pixels.data() + std::size_t(y) * img.width * 3);
  png_write_image(c.png, rows.data());
  png_write_end(c.png, nullptr);
}

// ---------------------------------------------------------------------------
// Geometry helpers shared by ingest and the impression model

inline GrayImage resize_bilinear(const GrayImage& src, int w, int h) {
  GrayImage out(w, h, 255, src.dpi);
  double sx = double(src.width) / w, sy = double(src.height) / h;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = src.bilinear((x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
      out.at(x, y) = detail::clamp_u8(v);
    }
  return out;
}

inline GrayImage rotate_about_center(const GrayImage& src, double degrees,
                                     double background = 255.0) {
  GrayImage out(src.width, src.height, detail::clamp_u8(background), src.dpi);
  double a = degrees * kPi / 180.0;
  double ca = std::cos(a), sa = std::sin(a);
  double cx = (src.width - 1) / 2.0, cy = (src.height - 1) / 2.0;
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      // inverse map: output pixel pulled from rotated source location
      double dx = x - cx, dy = y - cy;
      double sx2 = cx + ca * dx + sa * dy;
      double sy2 = cy - sa * dx + ca * dy;
      out.at(x, y) = detail::clamp_u8(src.bilinear(sx2, sy2, background));
    }
  return out;
}

inline GrayImage hflip(const GrayImage& src) {
  GrayImage out(src.width, src.height, 255, src.dpi);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) out.at(x, y) = src.at(src.width - 1 - x, y);
  return out;
}

// Crops to the bounding box of dark (foreground) content, with margin.
// Returns the input unchanged when nothing qualifies as foreground.
inline GrayImage contour_crop(const GrayImage& src, int threshold = 200, int margin = 8) {
  int x0 = src.width, y0 = src.height, x1 = -1, y1 = -1;
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x)
      if (src.at(x, y) < threshold) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) return src;
  x0 = std::max(0, x0 - margin);
  y0 = std::max(0, y0 - margin);
  x1 = std::min(src.width - 1, x1 + margin);
  y1 = std::min(src.height - 1, y1 + margin);
  GrayImage out(x1 - x0 + 1, y1 - y0 + 1, 255, src.dpi);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) out.at(x - x0, y - y0) = src.at(x, y);
  return out;
}

// Scales the longest side to the canonical size preserving aspect ratio and
// pads with background, centered.
inline GrayImage canonicalize(const GrayImage& src, int size = kCanonicalSize) {
  if (src.width == size && src.height == size) {
    GrayImage out = src;
    out.dpi = kCanonicalDpi;
    return out;
  }
  double scale = double(size) / std::max(src.width, src.height);
  int w = std::max(1, int(std::lround(src.width * scale)));
  int h = std::max(1, int(std::lround(src.height * scale)));
  GrayImage scaled = resize_bilinear(src, w, h);
  GrayImage out(size, size, 255, kCanonicalDpi);
  int ox = (size - w) / 2, oy = (size - h) / 2;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(x + ox, y + oy) = scaled.at(x, y);
  return out;
}

struct LoadOptions {
  bool contour_crop = false;  // crop to ridge content before canonicalizing
  bool canonicalize = true;
};

inline GrayImage load_fingerprint_png(const std::string& path, const LoadOptions& opt = {}) {
  GrayImage img = read_png_gray(path);
  if (opt.contour_crop) img = contour_crop(img);
  if (opt.canonicalize) img = canonicalize(img);
  validate(img);
  return img;
}

}  // namespace proxyprints

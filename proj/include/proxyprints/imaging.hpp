#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "proxyprints/image.hpp"

namespace proxyprints {

// Block-wise ridge orientation estimate. Angles are undirected ridge
// orientations in [0, pi); coherence 1 means perfectly parallel gradients in
// the block, 0 means no dominant direction.
struct OrientationField {
  int block_size = 16;
  int cols = 0;  // ceil(width / block_size)
  int rows = 0;  // ceil(height / block_size)
  std::vector<double> angles;     // rows*cols
  std::vector<double> coherence;  // rows*cols

  double angle_at(int bx, int by) const { return angles[std::size_t(by) * cols + bx]; }
  double coherence_at(int bx, int by) const { return coherence[std::size_t(by) * cols + bx]; }
};

inline std::pair<double, double> mean_variance(const GrayImage& img) {
  double sum = 0, sum2 = 0;
  for (auto p : img.pixels) {
    sum += p;
    sum2 += double(p) * p;
  }
  double n = double(img.pixels.size());
  double mean = sum / n;
  return {mean, std::max(0.0, sum2 / n - mean * mean)};
}

// Shifts/scales intensities to the requested mean and variance. A constant
// input comes back constant at target_mean.
inline GrayImage normalize(const GrayImage& img, double target_mean = 128.0,
                           double target_var = 2500.0) {
  validate(img);
  auto [mean, var] = mean_variance(img);
  GrayImage out(img.width, img.height, 0, img.dpi);
  if (var <= 1e-12) {
    std::fill(out.pixels.begin(), out.pixels.end(), detail::clamp_u8(target_mean));
    return out;
  }
  double scale = std::sqrt(target_var / var);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    out.pixels[i] = detail::clamp_u8(target_mean + (double(img.pixels[i]) - mean) * scale);
  return out;
}

// Gradient-squared least-squares block orientation (doubled-angle averaging).
inline OrientationField estimate_orientation(const GrayImage& img, int block_size = 16) {
  validate(img);
  if (block_size < 8 || block_size > 32)
    throw InvalidArgument("block_size must lie in [8,32]");
  if (img.width < 2 * block_size || img.height < 2 * block_size)
    throw InvalidArgument("image smaller than a 2x2 block grid");

  OrientationField f;
  f.block_size = block_size;
  f.cols = (img.width + block_size - 1) / block_size;
  f.rows = (img.height + block_size - 1) / block_size;
  f.angles.assign(std::size_t(f.rows) * f.cols, 0.0);
  f.coherence.assign(std::size_t(f.rows) * f.cols, 0.0);

  // Sobel gradients
  std::vector<double> gx(img.pixels.size()), gy(img.pixels.size());
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      auto s = [&](int dx, int dy) { return double(img.at_clamped(x + dx, y + dy)); };
      gx[std::size_t(y) * img.width + x] =
          (s(1, -1) + 2 * s(1, 0) + s(1, 1)) - (s(-1, -1) + 2 * s(-1, 0) + s(-1, 1));
      gy[std::size_t(y) * img.width + x] =
          (s(-1, 1) + 2 * s(0, 1) + s(1, 1)) - (s(-1, -1) + 2 * s(0, -1) + s(1, -1));
    }

  for (int by = 0; by < f.rows; ++by)
    for (int bx = 0; bx < f.cols; ++bx) {
      double gxx = 0, gyy = 0, gxy = 0;
      int x_end = std::min(img.width, (bx + 1) * block_size);
      int y_end = std::min(img.height, (by + 1) * block_size);
      for (int y = by * block_size; y < y_end; ++y)
        for (int x = bx * block_size; x < x_end; ++x) {
          double dx = gx[std::size_t(y) * img.width + x];
          double dy = gy[std::size_t(y) * img.width + x];
          gxx += dx * dx;
          gyy += dy * dy;
          gxy += dx * dy;
        }
      double denom = gxx + gyy;
      std::size_t idx = std::size_t(by) * f.cols + bx;
      if (denom < 1e-9) {
        f.angles[idx] = 0.0;
        f.coherence[idx] = 0.0;
        continue;
      }
      // gradient direction (doubled), ridge orientation is perpendicular
      double two_psi = std::atan2(2.0 * gxy, gxx - gyy);
      f.angles[idx] = detail::wrap_orientation(two_psi / 2.0 + kPi / 2.0);
      f.coherence[idx] = std::sqrt((gxx - gyy) * (gxx - gyy) + 4.0 * gxy * gxy) / denom;
    }
  return f;
}

namespace detail {

// Bilinear interpolation of the block orientation field at pixel resolution,
// done on doubled-angle vectors so wrap-around averages correctly.
struct FieldSampler {
  const OrientationField& f;

  // returns {angle in [0,pi), coherence}
  std::pair<double, double> at(double px, double py) const {
    double bx = px / f.block_size - 0.5;
    double by = py / f.block_size - 0.5;
    int x0 = int(std::floor(bx)), y0 = int(std::floor(by));
    double fx = bx - x0, fy = by - y0;
    double vx = 0, vy = 0, wsum = 0;
    for (int dy = 0; dy <= 1; ++dy)
      for (int dx = 0; dx <= 1; ++dx) {
        int cx = std::clamp(x0 + dx, 0, f.cols - 1);
        int cy = std::clamp(y0 + dy, 0, f.rows - 1);
        double w = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy);
        double a = f.angle_at(cx, cy), c = f.coherence_at(cx, cy);
        vx += w * c * std::cos(2 * a);
        vy += w * c * std::sin(2 * a);
        wsum += w;
      }
    double mag = std::hypot(vx, vy);
    if (wsum <= 0 || mag < 1e-12) return {0.0, 0.0};
    return {wrap_orientation(std::atan2(vy, vx) / 2.0), mag / wsum};
  }
};

}  // namespace detail

// Oriented band-pass (Gabor) ridge enhancement. The filter bank is quantized
// to 16 orientations; blocks with no coherent direction pass through
// unfiltered.
inline GrayImage enhance(const GrayImage& img, const OrientationField& field,
                         double ridge_freq = 0.10) {
  validate(img);
  if (ridge_freq < 1.0 / 20.0 || ridge_freq > 1.0 / 5.0)
    throw InvalidArgument("ridge_freq must lie in [1/20, 1/5] cycles/pixel");

  constexpr int kOrientations = 16;
  constexpr int kHalf = 5;  // 11x11 kernels
  constexpr double kCoherenceFloor = 0.08;
  const double sigma_across = 3.0;  // across-ridge envelope
  const double sigma_along = 5.0;   // along-ridge envelope

  // Precompute the bank: one zero-mean kernel per quantized orientation.
  std::array<std::array<double, (2 * kHalf + 1) * (2 * kHalf + 1)>, kOrientations> bank{};
  for (int oi = 0; oi < kOrientations; ++oi) {
    double theta = kPi * oi / kOrientations;  // ridge direction
    double nx = -std::sin(theta), ny = std::cos(theta);  // ridge normal
    double tx = std::cos(theta), ty = std::sin(theta);
    double sum = 0;
    auto& k = bank[oi];
    int i = 0;
    for (int dy = -kHalf; dy <= kHalf; ++dy)
      for (int dx = -kHalf; dx <= kHalf; ++dx, ++i) {
        double u = dx * nx + dy * ny;  // across ridges
        double v = dx * tx + dy * ty;  // along ridges
        double g = std::exp(-(u * u / (2 * sigma_across * sigma_across) +
                              v * v / (2 * sigma_along * sigma_along))) *
                   std::cos(kTwoPi * ridge_freq * u);
        k[i] = g;
        sum += g;
      }
    double mean = sum / double(k.size());
    double norm2 = 0;
    for (auto& v : k) {
      v -= mean;
      norm2 += v * v;
    }
    double inv = 1.0 / std::sqrt(std::max(norm2, 1e-12));
    for (auto& v : k) v *= inv;
  }

  detail::FieldSampler sampler{field};
  GrayImage out(img.width, img.height, 255, img.dpi);
  std::vector<double> resp(img.pixels.size(), 0.0);
  std::vector<std::uint8_t> active(img.pixels.size(), 0);
  double rsum = 0, rsum2 = 0;
  std::size_t rcount = 0;

  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      auto [theta, coh] = sampler.at(x, y);
      std::size_t idx = std::size_t(y) * img.width + x;
      if (coh < kCoherenceFloor) continue;  // pass-through pixel
      int oi = int(std::lround(theta / kPi * kOrientations)) % kOrientations;
      const auto& k = bank[oi];
      double acc = 0;
      int i = 0;
      for (int dy = -kHalf; dy <= kHalf; ++dy)
        for (int dx = -kHalf; dx <= kHalf; ++dx, ++i)
          acc += k[i] * img.at_clamped(x + dx, y + dy);
      resp[idx] = acc;
      active[idx] = 1;
      rsum += acc;
      rsum2 += acc * acc;
      ++rcount;
    }

  if (rcount == 0) return img;  // nothing coherent anywhere
  double rmean = rsum / double(rcount);
  double rsd = std::sqrt(std::max(1e-12, rsum2 / double(rcount) - rmean * rmean));
  // Ridge (dark) pixels produce negative filter response; map responses to a
  // standardized intensity scale.
  for (std::size_t i = 0; i < resp.size(); ++i)
    out.pixels[i] = active[i]
                        ? detail::clamp_u8(128.0 + 60.0 * (resp[i] - rmean) / rsd)
                        : img.pixels[i];
  return out;
}

inline GrayImage enhance(const GrayImage& img, double ridge_freq = 0.10, int block_size = 16) {
  return enhance(img, estimate_orientation(img, block_size), ridge_freq);
}

// Declared quality proxy: weighted product of foreground coverage, mean block
// coherence and local contrast, scaled to 0..100. Not NFIQ2.
inline int quality_proxy(const GrayImage& img) {
  validate(img);
  const int bs = 16;
  OrientationField f = estimate_orientation(img, bs);

  int fg_blocks = 0, total_blocks = f.rows * f.cols;
  double coh_sum = 0, contrast_sum = 0;
  for (int by = 0; by < f.rows; ++by)
    for (int bx = 0; bx < f.cols; ++bx) {
      double sum = 0, sum2 = 0;
      int n = 0;
      int x_end = std::min(img.width, (bx + 1) * bs);
      int y_end = std::min(img.height, (by + 1) * bs);
      for (int y = by * bs; y < y_end; ++y)
        for (int x = bx * bs; x < x_end; ++x) {
          double p = img.at(x, y);
          sum += p;
          sum2 += p * p;
          ++n;
        }
      double var = std::max(0.0, sum2 / n - (sum / n) * (sum / n));
      if (var > 100.0) {  // sd > 10: ridge-bearing block
        ++fg_blocks;
        coh_sum += f.coherence_at(bx, by);
        contrast_sum += std::sqrt(var);
      }
    }

  if (fg_blocks == 0) return 0;
  double coverage = double(fg_blocks) / double(total_blocks);
  double coherence = coh_sum / fg_blocks;
  double contrast = contrast_sum / fg_blocks;

  double cov_term = std::min(1.0, coverage / 0.30);
  double coh_term = std::clamp(coherence, 0.0, 1.0);
  double con_term = std::min(1.0, contrast / 55.0);
  double q = 100.0 * std::pow(cov_term, 0.6) * std::pow(coh_term, 1.2) * std::pow(con_term, 0.4);
  return int(std::clamp(q, 0.0, 100.0) + 0.5);
}

}  // namespace proxyprints

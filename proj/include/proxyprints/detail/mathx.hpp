#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace proxyprints {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

namespace detail {

// wrap to [0, 2*pi)
inline double wrap_two_pi(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0) a += kTwoPi;
  return a;
}

// wrap to (-pi, pi]
inline double wrap_pi(double a) {
  a = std::fmod(a + kPi, kTwoPi);
  if (a <= 0) a += kTwoPi;
  return a - kPi;
}

// wrap an undirected orientation to [0, pi)
inline double wrap_orientation(double a) {
  a = std::fmod(a, kPi);
  if (a < 0) a += kPi;
  return a;
}

// absolute circular distance of two directed angles, in [0, pi]
inline double angle_diff(double a, double b) { return std::abs(wrap_pi(a - b)); }

// absolute distance of two undirected orientations, in [0, pi/2]
inline double orientation_diff(double a, double b) {
  double d = std::abs(wrap_pi(2.0 * (a - b))) / 2.0;
  return d;
}

inline std::uint8_t clamp_u8(double v) {
  return std::uint8_t(std::clamp(v, 0.0, 255.0) + 0.5);
}

inline double smoothstep(double edge0, double edge1, double x) {
  double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

// Polynomial atan2 approximation, max error ~1e-5 rad. The decoder evaluates
// one spiral-phase term per seeded minutia per pixel, which makes std::atan2
// the dominant cost; phase error at this scale is far below pixel quantization.
inline double fast_atan(double z) {
  // minimax polynomial for atan(z), |z| <= 1
  double z2 = z * z;
  return z * (0.99997726 + z2 * (-0.33262347 + z2 * (0.19354346 + z2 * (-0.11643287 + z2 * (0.05265332 - z2 * 0.01172120)))));
}

inline double fast_atan2(double y, double x) {
  if (x == 0.0 && y == 0.0) return 0.0;
  double ax = std::abs(x), ay = std::abs(y);
  bool swap = ay > ax;
  double z = swap ? ax / ay : ay / ax;
  double r = fast_atan(z);
  if (swap) r = kPi / 2.0 - r;
  if (x < 0) r = kPi - r;
  return y < 0 ? -r : r;
}

// standard normal CDF
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / 1.4142135623730951); }

}  // namespace detail
}  // namespace proxyprints

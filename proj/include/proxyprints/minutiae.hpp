#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "proxyprints/detail/prng.hpp"
#include "proxyprints/imaging.hpp"

#include <nlohmann/json.hpp>

namespace proxyprints {

enum class MinutiaKind : std::uint8_t { termination = 0, bifurcation = 1 };

// A ridge feature: ending or split, with position, direction and a local
// quality weight. The angle points into the ridge flow.
struct Minutia {
  double x = 0;
  double y = 0;
  double angle = 0;  // [0, 2*pi)
  MinutiaKind kind = MinutiaKind::termination;
  double quality = 1.0;  // [0,1]
};

struct Template {
  std::vector<Minutia> minutiae;
  int width = kCanonicalSize;
  int height = kCanonicalSize;
  int dpi = kCanonicalDpi;

  std::size_t size() const { return minutiae.size(); }
};

inline constexpr std::size_t kMaxMinutiae = 512;
inline constexpr std::size_t kMinMatchableMinutiae = 8;
inline constexpr double kMinutiaMergeRadius = 6.0;

inline void validate(const Template& t) {
  if (t.minutiae.size() > kMaxMinutiae)
    throw InvalidArgument("template holds more than 512 minutiae");
  for (const auto& m : t.minutiae) {
    if (m.x < 0 || m.y < 0 || m.x >= t.width || m.y >= t.height)
      throw InvalidArgument("minutia outside image bounds");
    if (m.angle < 0 || m.angle >= kTwoPi) throw InvalidArgument("minutia angle not normalized");
    if (m.quality < 0 || m.quality > 1) throw InvalidArgument("minutia quality out of range");
  }
}

// Extraction found too little ridge structure; carries whatever was found.
struct LowQualityError : Error {
  Template partial;
  LowQualityError(const std::string& what, Template partial_template)
      : Error(what), partial(std::move(partial_template)) {}
};

// ---------------------------------------------------------------------------
// Extraction pipeline: adaptive binarization -> thinning -> crossing-number
// classification -> pruning/merging.

namespace detail {

struct BinaryField {
  int width = 0, height = 0;
  std::vector<std::uint8_t> ridge;       // 1 = ridge pixel
  std::vector<std::uint8_t> foreground;  // 1 = inside fingerprint area

  std::uint8_t r(int x, int y) const { return ridge[std::size_t(y) * width + x]; }
  std::uint8_t& r(int x, int y) { return ridge[std::size_t(y) * width + x]; }
  std::uint8_t fg(int x, int y) const { return foreground[std::size_t(y) * width + x]; }
};

// Local-mean threshold over a 17x17 window; foreground requires local
// standard deviation above a floor so flat background never binarizes.
inline BinaryField binarize(const GrayImage& img) {
  const int half = 8;
  BinaryField b;
  b.width = img.width;
  b.height = img.height;
  b.ridge.assign(img.pixels.size(), 0);
  b.foreground.assign(img.pixels.size(), 0);

  const int w = img.width, h = img.height;
  std::vector<double> integ(std::size_t(w + 1) * (h + 1), 0.0);
  std::vector<double> integ2(std::size_t(w + 1) * (h + 1), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double p = img.at(x, y);
      std::size_t i = std::size_t(y + 1) * (w + 1) + (x + 1);
      integ[i] = p + integ[i - 1] + integ[i - (w + 1)] - integ[i - (w + 1) - 1];
      integ2[i] = p * p + integ2[i - 1] + integ2[i - (w + 1)] - integ2[i - (w + 1) - 1];
    }
  auto window = [&](const std::vector<double>& s, int x0, int y0, int x1, int y1) {
    return s[std::size_t(y1 + 1) * (w + 1) + (x1 + 1)] - s[std::size_t(y0) * (w + 1) + (x1 + 1)] -
           s[std::size_t(y1 + 1) * (w + 1) + x0] + s[std::size_t(y0) * (w + 1) + x0];
  };

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int x0 = std::max(0, x - half), y0 = std::max(0, y - half);
      int x1 = std::min(w - 1, x + half), y1 = std::min(h - 1, y + half);
      double n = double(x1 - x0 + 1) * (y1 - y0 + 1);
      double mean = window(integ, x0, y0, x1, y1) / n;
      double var = std::max(0.0, window(integ2, x0, y0, x1, y1) / n - mean * mean);
      std::size_t i = std::size_t(y) * w + x;
      if (var > 81.0) {  // local sd > 9
        b.foreground[i] = 1;
        if (img.pixels[i] < mean - 2.0) b.ridge[i] = 1;
      }
    }
  return b;
}

// Zhang-Suen thinning to a 1-pixel skeleton.
inline void thin(BinaryField& b) {
  const int w = b.width, h = b.height;
  auto at = [&](int x, int y) -> int {
    return (x < 0 || y < 0 || x >= w || y >= h) ? 0 : b.r(x, y);
  };
  std::vector<std::size_t> to_clear;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int phase = 0; phase < 2; ++phase) {
      to_clear.clear();
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          if (!b.r(x, y)) continue;
          int p2 = at(x, y - 1), p3 = at(x + 1, y - 1), p4 = at(x + 1, y);
          int p5 = at(x + 1, y + 1), p6 = at(x, y + 1), p7 = at(x - 1, y + 1);
          int p8 = at(x - 1, y), p9 = at(x - 1, y - 1);
          int bsum = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
          if (bsum < 2 || bsum > 6) continue;
          int a = (p2 == 0 && p3 == 1) + (p3 == 0 && p4 == 1) + (p4 == 0 && p5 == 1) +
                  (p5 == 0 && p6 == 1) + (p6 == 0 && p7 == 1) + (p7 == 0 && p8 == 1) +
                  (p8 == 0 && p9 == 1) + (p9 == 0 && p2 == 1);
          if (a != 1) continue;
          if (phase == 0) {
            if (p2 * p4 * p6 != 0 || p4 * p6 * p8 != 0) continue;
          } else {
            if (p2 * p4 * p8 != 0 || p2 * p6 * p8 != 0) continue;
          }
          to_clear.push_back(std::size_t(y) * w + x);
        }
      for (auto i : to_clear) b.ridge[i] = 0;
      if (!to_clear.empty()) changed = true;
    }
  }
}

inline int neighbor_count(const BinaryField& b, int x, int y) {
  int c = 0;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      if (dx == 0 && dy == 0) continue;
      int nx = x + dx, ny = y + dy;
      if (nx >= 0 && ny >= 0 && nx < b.width && ny < b.height && b.r(nx, ny)) ++c;
    }
  return c;
}

// Removes skeleton spurs shorter than max_len (walk from each endpoint until
// a junction; short walks are artifacts of thinning).
inline void prune_spurs(BinaryField& b, int max_len = 6, int passes = 2) {
  const int w = b.width, h = b.height;
  for (int pass = 0; pass < passes; ++pass) {
    std::vector<std::size_t> removed;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!b.r(x, y)) continue;
        int nc = neighbor_count(b, x, y);
        if (nc == 0) {
          removed.push_back(std::size_t(y) * w + x);  // isolated dot
          continue;
        }
        if (nc != 1) continue;
        // walk from endpoint
        std::vector<std::size_t> trail{std::size_t(y) * w + x};
        int cx = x, cy = y, px = -1, py = -1;
        bool is_spur = false;
        for (int step = 0; step < max_len; ++step) {
          int nx = -1, ny = -1;
          for (int dy = -1; dy <= 1 && nx < 0; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              if (dx == 0 && dy == 0) continue;
              int tx = cx + dx, ty = cy + dy;
              if (tx < 0 || ty < 0 || tx >= w || ty >= h) continue;
              if (!b.r(tx, ty) || (tx == px && ty == py)) continue;
              nx = tx;
              ny = ty;
              break;
            }
          if (nx < 0) break;  // dead end: whole branch shorter than max_len
          int nnc = neighbor_count(b, nx, ny);
          if (nnc >= 3) {
            is_spur = true;  // reached a junction quickly
            break;
          }
          trail.push_back(std::size_t(ny) * w + nx);
          px = cx;
          py = cy;
          cx = nx;
          cy = ny;
        }
        if (is_spur)
          for (auto i : trail) removed.push_back(i);
      }
    if (removed.empty()) break;
    for (auto i : removed) b.ridge[i] = 0;
  }
}

// Traces along the skeleton from (x,y), stepping away from the previous
// pixel, for up to max_steps; returns the average direction of travel.
inline std::optional<double> trace_direction(const BinaryField& b, int x, int y, int from_x,
                                             int from_y, int max_steps = 8) {
  int cx = x, cy = y, px = from_x, py = from_y;
  double sum_dx = 0, sum_dy = 0;
  int steps = 0;
  for (int s = 0; s < max_steps; ++s) {
    int nx = -1, ny = -1;
    for (int dy = -1; dy <= 1 && nx < 0; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        int tx = cx + dx, ty = cy + dy;
        if (tx < 0 || ty < 0 || tx >= b.width || ty >= b.height) continue;
        if (!b.r(tx, ty) || (tx == px && ty == py)) continue;
        // don't step back onto the origin either
        if (tx == x && ty == y) continue;
        nx = tx;
        ny = ty;
        break;
      }
    if (nx < 0) break;
    sum_dx += nx - x;
    sum_dy += ny - y;
    ++steps;
    if (neighbor_count(b, nx, ny) >= 3) break;  // stop at the next junction
    px = cx;
    py = cy;
    cx = nx;
    cy = ny;
  }
  if (steps == 0) return std::nullopt;
  return std::atan2(sum_dy, sum_dx);
}

}  // namespace detail

// Minutiae extraction. Deterministic; merges features closer than 6 px;
// throws LowQualityError (with the partial template) below 8 minutiae.
inline Template extract(const GrayImage& img) {
  validate(img);
  detail::BinaryField b = detail::binarize(img);
  detail::thin(b);
  detail::prune_spurs(b);

  OrientationField field = estimate_orientation(img, 16);
  detail::FieldSampler sampler{field};

  const int w = b.width, h = b.height;
  const int border = 12;

  // Erode the foreground so boundary artifacts are ignored: a candidate must
  // have no background pixel within Chebyshev distance 10.
  std::vector<std::uint32_t> fg_integ(std::size_t(w + 1) * (h + 1), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::size_t i = std::size_t(y + 1) * (w + 1) + (x + 1);
      fg_integ[i] = b.fg(x, y) + fg_integ[i - 1] + fg_integ[i - (w + 1)] - fg_integ[i - (w + 1) - 1];
    }
  auto fg_count = [&](int x0, int y0, int x1, int y1) -> std::uint32_t {
    return fg_integ[std::size_t(y1 + 1) * (w + 1) + (x1 + 1)] -
           fg_integ[std::size_t(y0) * (w + 1) + (x1 + 1)] -
           fg_integ[std::size_t(y1 + 1) * (w + 1) + x0] + fg_integ[std::size_t(y0) * (w + 1) + x0];
  };
  auto interior = [&](int x, int y) {
    const int m = 10;
    int x0 = x - m, y0 = y - m, x1 = x + m, y1 = y + m;
    if (x0 < 0 || y0 < 0 || x1 >= w || y1 >= h) return false;
    std::uint32_t area = std::uint32_t(x1 - x0 + 1) * (y1 - y0 + 1);
    return fg_count(x0, y0, x1, y1) == area;
  };

  std::vector<Minutia> found;
  for (int y = border; y < h - border; ++y)
    for (int x = border; x < w - border; ++x) {
      if (!b.r(x, y) || !interior(x, y)) continue;
      // crossing number over the 8-neighborhood cycle
      int p[8] = {b.r(x, y - 1),     b.r(x + 1, y - 1), b.r(x + 1, y), b.r(x + 1, y + 1),
                  b.r(x, y + 1),     b.r(x - 1, y + 1), b.r(x - 1, y), b.r(x - 1, y - 1)};
      int cn = 0;
      for (int i = 0; i < 8; ++i) cn += std::abs(p[i] - p[(i + 1) % 8]);
      cn /= 2;
      if (cn != 1 && cn != 3) continue;

      auto [theta, coh] = sampler.at(x, y);
      if (coh < 0.10) continue;  // incoherent region, likely noise

      Minutia m;
      m.x = x;
      m.y = y;
      m.quality = std::clamp(coh, 0.0, 1.0);
      if (cn == 1) {
        m.kind = MinutiaKind::termination;
        auto dir = detail::trace_direction(b, x, y, -1, -1);
        if (!dir) continue;
        m.angle = detail::wrap_two_pi(*dir);
      } else {
        m.kind = MinutiaKind::bifurcation;
        // direction of the fork: bisector of the two most parallel branches
        std::vector<std::pair<int, int>> starts;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            int tx = x + dx, ty = y + dy;
            if (tx >= 0 && ty >= 0 && tx < w && ty < h && b.r(tx, ty)) starts.push_back({tx, ty});
          }
        std::vector<std::pair<double, double>> dirs;
        for (auto [sx, sy] : starts) {
          auto d = detail::trace_direction(b, sx, sy, x, y);
          double ang = d ? *d : std::atan2(sy - y, sx - x);
          dirs.push_back({std::cos(ang), std::sin(ang)});
        }
        if (dirs.size() < 3) continue;
        double best = -2;
        int bi = 0, bj = 1;
        for (std::size_t i = 0; i < dirs.size(); ++i)
          for (std::size_t j = i + 1; j < dirs.size(); ++j) {
            double dot = dirs[i].first * dirs[j].first + dirs[i].second * dirs[j].second;
            if (dot > best) {
              best = dot;
              bi = int(i);
              bj = int(j);
            }
          }
        double vx = dirs[bi].first + dirs[bj].first;
        double vy = dirs[bi].second + dirs[bj].second;
        if (std::abs(vx) < 1e-12 && std::abs(vy) < 1e-12) continue;
        m.angle = detail::wrap_two_pi(std::atan2(vy, vx));
      }
      found.push_back(m);
    }

  // Merge anything closer than 6 px, keeping the higher-quality feature.
  std::stable_sort(found.begin(), found.end(), [](const Minutia& a, const Minutia& b) {
    if (a.quality != b.quality) return a.quality > b.quality;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  std::vector<Minutia> kept;
  for (const auto& m : found) {
    bool clash = false;
    for (const auto& k : kept) {
      double dx = m.x - k.x, dy = m.y - k.y;
      if (dx * dx + dy * dy < kMinutiaMergeRadius * kMinutiaMergeRadius) {
        clash = true;
        break;
      }
    }
    if (!clash) kept.push_back(m);
    if (kept.size() >= kMaxMinutiae) break;
  }
  // canonical order: scanline
  std::stable_sort(kept.begin(), kept.end(), [](const Minutia& a, const Minutia& b) {
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });

  Template t;
  t.width = img.width;
  t.height = img.height;
  t.dpi = img.dpi;
  t.minutiae = std::move(kept);
  if (t.minutiae.size() < kMinMatchableMinutiae)
    throw LowQualityError("extraction found only " + std::to_string(t.minutiae.size()) +
                              " minutiae (need 8)",
                          std::move(t));
  return t;
}

// ---------------------------------------------------------------------------
// RGB template rendering: bifurcations in red, terminations in green, blue
// unused. To keep the channels exactly disjoint, green strokes skip pixels
// already claimed by red.

inline RgbImage render_template(const Template& t, int dot_radius = 2, int tail_len = 10) {
  validate(t);
  RgbImage img(t.width, t.height);

  auto draw = [&](const Minutia& m, int channel) {
    auto put = [&](int x, int y) {
      if (!img.in_bounds(x, y)) return;
      auto* p = img.px(x, y);
      if (channel == 1 && p[0] > 0) return;  // red has priority on overlap
      p[channel] = 255;
    };
    int cx = int(std::lround(m.x)), cy = int(std::lround(m.y));
    for (int dy = -dot_radius; dy <= dot_radius; ++dy)
      for (int dx = -dot_radius; dx <= dot_radius; ++dx)
        if (dx * dx + dy * dy <= dot_radius * dot_radius) put(cx + dx, cy + dy);
    double ca = std::cos(m.angle), sa = std::sin(m.angle);
    for (int s = 0; s <= tail_len * 2; ++s) {
      double d = s * 0.5;
      put(int(std::lround(m.x + ca * d)), int(std::lround(m.y + sa * d)));
    }
  };

  for (const auto& m : t.minutiae)
    if (m.kind == MinutiaKind::bifurcation) draw(m, 0);
  for (const auto& m : t.minutiae)
    if (m.kind == MinutiaKind::termination) draw(m, 1);
  return img;
}

// ---------------------------------------------------------------------------
// Impression variation model: small rotation, random crop re-padded to the
// canonical frame, additive Gaussian noise. Deterministic per seed;
// all-zero parameters return the canonical image unchanged.

inline GrayImage perturb_impression(const GrayImage& img, double rot_degrees, double crop_frac,
                                    double noise_sd, std::uint64_t seed) {
  validate(img);
  if (std::abs(rot_degrees) > 15.0) throw InvalidArgument("|rotation| must be <= 15 degrees");
  if (crop_frac < 0 || crop_frac > 0.2) throw InvalidArgument("crop_frac must lie in [0, 0.2]");
  if (noise_sd < 0) throw InvalidArgument("noise_sd must be non-negative");

  GrayImage out = canonicalize(img);
  if (rot_degrees == 0.0 && crop_frac == 0.0 && noise_sd == 0.0) return out;

  detail::SplitMix64 rng(seed);
  if (rot_degrees != 0.0) out = rotate_about_center(out, rot_degrees);

  if (crop_frac > 0.0) {
    // crop a (1-crop_frac)-sized window at a random anchor, re-pad centered
    int cw = std::max(64, int(std::lround(out.width * (1.0 - crop_frac))));
    int ch = std::max(64, int(std::lround(out.height * (1.0 - crop_frac))));
    int ox = int(rng.next_below(std::uint32_t(out.width - cw + 1)));
    int oy = int(rng.next_below(std::uint32_t(out.height - ch + 1)));
    GrayImage padded(out.width, out.height, 255, out.dpi);
    int px = (out.width - cw) / 2, py = (out.height - ch) / 2;
    for (int y = 0; y < ch; ++y)
      for (int x = 0; x < cw; ++x) padded.at(px + x, py + y) = out.at(ox + x, oy + y);
    out = std::move(padded);
  }

  if (noise_sd > 0.0) {
    for (auto& p : out.pixels)
      p = detail::clamp_u8(double(p) + rng.next_gaussian() * noise_sd);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization: versioned JSON and a compact little-endian binary record.

inline nlohmann::json template_to_json(const Template& t) {
  nlohmann::json j;
  j["format"] = "proxyprints-template/1";
  j["width"] = t.width;
  j["height"] = t.height;
  j["dpi"] = t.dpi;
  auto arr = nlohmann::json::array();
  for (const auto& m : t.minutiae) {
    arr.push_back({{"x", m.x},
                   {"y", m.y},
                   {"angle", m.angle},
                   {"kind", m.kind == MinutiaKind::bifurcation ? "bifurcation" : "termination"},
                   {"quality", m.quality}});
  }
  j["minutiae"] = std::move(arr);
  return j;
}

inline Template template_from_json(const nlohmann::json& j) {
  if (!j.contains("format") || j["format"] != "proxyprints-template/1")
    throw IoError("not a proxyprints-template/1 document");
  Template t;
  t.width = j.at("width").get<int>();
  t.height = j.at("height").get<int>();
  t.dpi = j.value("dpi", kCanonicalDpi);
  for (const auto& jm : j.at("minutiae")) {
    Minutia m;
    m.x = jm.at("x").get<double>();
    m.y = jm.at("y").get<double>();
    m.angle = jm.at("angle").get<double>();
    m.kind = jm.at("kind").get<std::string>() == "bifurcation" ? MinutiaKind::bifurcation
                                                               : MinutiaKind::termination;
    m.quality = jm.value("quality", 1.0);
    t.minutiae.push_back(m);
  }
  validate(t);
  return t;
}

namespace detail {

template <typename T>
void write_le(std::string& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

inline void write_f32_le(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  write_le(out, bits);
}

struct ByteReader {
  const std::uint8_t* p;
  const std::uint8_t* end;
  template <typename T>
  T read_le() {
    if (p + sizeof(T) > end) throw IoError("truncated template record");
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= T(p[i]) << (8 * i);
    p += sizeof(T);
    return v;
  }
  float read_f32_le() {
    auto bits = read_le<std::uint32_t>();
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  }
};

}  // namespace detail

// Binary record: magic "PPT1", u16 width/height/dpi/count, then per minutia
// f32 x, f32 y, f32 angle, u8 kind, f32 quality. Little-endian throughout.
inline std::string template_to_binary(const Template& t) {
  validate(t);
  std::string out = "PPT1";
  detail::write_le<std::uint16_t>(out, std::uint16_t(t.width));
  detail::write_le<std::uint16_t>(out, std::uint16_t(t.height));
  detail::write_le<std::uint16_t>(out, std::uint16_t(t.dpi));
  detail::write_le<std::uint16_t>(out, std::uint16_t(t.minutiae.size()));
  for (const auto& m : t.minutiae) {
    detail::write_f32_le(out, float(m.x));
    detail::write_f32_le(out, float(m.y));
    detail::write_f32_le(out, float(m.angle));
    out.push_back(char(std::uint8_t(m.kind)));
    detail::write_f32_le(out, float(m.quality));
  }
  return out;
}

inline Template template_from_binary(const std::string& bytes) {
  if (bytes.size() < 12 || bytes.compare(0, 4, "PPT1") != 0)
    throw IoError("not a PPT1 template record");
  detail::ByteReader r{reinterpret_cast<const std::uint8_t*>(bytes.data()) + 4,
                       reinterpret_cast<const std::uint8_t*>(bytes.data()) + bytes.size()};
  Template t;
  t.width = r.read_le<std::uint16_t>();
  t.height = r.read_le<std::uint16_t>();
  t.dpi = r.read_le<std::uint16_t>();
  auto count = r.read_le<std::uint16_t>();
  for (int i = 0; i < count; ++i) {
    Minutia m;
    m.x = r.read_f32_le();
    m.y = r.read_f32_le();
    m.angle = detail::wrap_two_pi(r.read_f32_le());
    m.kind = MinutiaKind(r.read_le<std::uint8_t>() ? 1 : 0);
    m.quality = std::clamp<double>(r.read_f32_le(), 0.0, 1.0);
    t.minutiae.push_back(m);
  }
  validate(t);
  return t;
}

inline void save_template(const Template& t, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write template: " + path);
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0)
    f << template_to_json(t).dump(2) << "\n";
  else
    f << template_to_binary(t);
}

inline Template load_template(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read template: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.rfind("PPT1", 0) == 0) return template_from_binary(bytes);
  return template_from_json(nlohmann::json::parse(bytes));
}

}  // namespace proxyprints

#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <cmath>
#include <vector>

namespace proxyprints::detail {

// splitmix64: seeded utility PRNG for non-secret randomness (corpus seeds,
// projection matrices, perturbation noise). Stable across platforms.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0,1) with 53-bit resolution
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // one N(0,1) sample per call (Box-Muller, cached pair)
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_double(), u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  std::uint32_t next_below(std::uint32_t bound) {
    return std::uint32_t(next_u64() % std::uint64_t(bound));
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// ChaCha20 keystream (RFC 8439 block function, zero nonce, 32-bit counter).
// Used to expand a 256-bit secret into the deterministic random stream that
// seeds rotation derivation. Only the keystream is needed, never encryption.
class ChaCha20Stream {
 public:
  explicit ChaCha20Stream(const std::array<std::uint8_t, 32>& key) {
    static const char kConstants[17] = "expand 32-byte k";
    for (int i = 0; i < 4; ++i) state_[i] = load32(reinterpret_cast<const std::uint8_t*>(kConstants) + 4 * i);
    for (int i = 0; i < 8; ++i) state_[4 + i] = load32(key.data() + 4 * i);
    state_[12] = 0;  // counter
    state_[13] = state_[14] = state_[15] = 0;  // nonce
  }

  void fill(std::uint8_t* out, std::size_t len) {
    while (len > 0) {
      if (pos_ == 64) refill();
      std::size_t take = std::min<std::size_t>(64 - pos_, len);
      std::memcpy(out, block_ + pos_, take);
      pos_ += take;
      out += take;
      len -= take;
    }
  }

  std::uint64_t next_u64() {
    std::uint8_t b[8];
    fill(b, 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }

  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // N(0,1), Box-Muller; sampling order is part of the derivation contract
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_double(), u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  static std::uint32_t load32(const std::uint8_t* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
           (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
  }
  static std::uint32_t rotl(std::uint32_t v, int c) { return (v << c) | (v >> (32 - c)); }
  static void quarter_round(std::uint32_t& a, std::uint32_t& b, std::uint32_t& c, std::uint32_t& d) {
    a += b; d ^= a; d = rotl(d, 16);
    c += d; b ^= c; b = rotl(b, 12);
    a += b; d ^= a; d = rotl(d, 8);
    c += d; b ^= c; b = rotl(b, 7);
  }

  void refill() {
    std::uint32_t x[16];
    std::memcpy(x, state_, sizeof(x));
    for (int round = 0; round < 10; ++round) {
      quarter_round(x[0], x[4], x[8], x[12]);
      quarter_round(x[1], x[5], x[9], x[13]);
      quarter_round(x[2], x[6], x[10], x[14]);
      quarter_round(x[3], x[7], x[11], x[15]);
      quarter_round(x[0], x[5], x[10], x[15]);
      quarter_round(x[1], x[6], x[11], x[12]);
      quarter_round(x[2], x[7], x[8], x[13]);
      quarter_round(x[3], x[4], x[9], x[14]);
    }
    for (int i = 0; i < 16; ++i) x[i] += state_[i];
    for (int i = 0; i < 16; ++i) {
      block_[4 * i + 0] = std::uint8_t(x[i] & 0xff);
      block_[4 * i + 1] = std::uint8_t((x[i] >> 8) & 0xff);
      block_[4 * i + 2] = std::uint8_t((x[i] >> 16) & 0xff);
      block_[4 * i + 3] = std::uint8_t((x[i] >> 24) & 0xff);
    }
    state_[12] += 1;
    pos_ = 0;
  }

  std::uint32_t state_[16];
  std::uint8_t block_[64];
  std::size_t pos_ = 64;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace proxyprints::detail

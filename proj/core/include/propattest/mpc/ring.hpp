#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "propattest/common/error.hpp"

namespace propattest::mpc {

// Element of Z_{2^64}; unsigned overflow is the ring reduction.
using Ring = std::uint64_t;

inline constexpr int kRingBits = 64;
inline constexpr int kDefaultFracBits = 16;

constexpr Ring ring_mask(int bits) { return bits >= 64 ? ~Ring{0} : ((Ring{1} << bits) - 1); }

// Two's-complement view of a k-bit ring element.
constexpr std::int64_t to_signed(Ring v, int bits = kRingBits) {
  v &= ring_mask(bits);
  if (bits < 64 && (v >> (bits - 1)) != 0) return static_cast<std::int64_t>(v) - (std::int64_t{1} << bits);
  return static_cast<std::int64_t>(v);
}

// round(x * 2^f) mapped into the ring.
struct FixedPoint {
  int frac_bits = kDefaultFracBits;
  int ring_bits = kRingBits;

  // Inputs must satisfy |x| < 2^(k - f - 2).
  Ring encode(double x) const {
    double limit = std::ldexp(1.0, ring_bits - frac_bits - 2);
    if (!std::isfinite(x) || std::abs(x) >= limit) throw InvalidArgument("value outside the fixed-point range");
    return static_cast<Ring>(std::llround(std::ldexp(x, frac_bits))) & ring_mask(ring_bits);
  }
  double decode(Ring v) const { return std::ldexp(static_cast<double>(to_signed(v, ring_bits)), -frac_bits); }

  std::vector<Ring> encode(std::span<const double> xs) const {
    std::vector<Ring> out;
    out.reserve(xs.size());
    for (double x : xs) out.push_back(encode(x));
    return out;
  }
  std::vector<double> decode(std::span<const Ring> vs) const {
    std::vector<double> out;
    out.reserve(vs.size());
    for (Ring v : vs) out.push_back(decode(v));
    return out;
  }
};

// floor(v / 2^f) on the signed interpretation; the truncation rule every
// secure multiplication reproduces exactly.
constexpr Ring truncate_plain(Ring v, int frac_bits) {
  return static_cast<Ring>(static_cast<std::int64_t>(v) >> frac_bits);
}

}  // namespace propattest::mpc

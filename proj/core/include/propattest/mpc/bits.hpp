#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "propattest/common/binary_io.hpp"

namespace propattest::mpc {

// LSB-first bit packing, 8 bits per byte.
inline void pack_bits(ByteWriter& w, std::span<const std::uint8_t> bits) {
  std::uint8_t acc = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    acc |= static_cast<std::uint8_t>((bits[i] & 1U) << (i % 8));
    if (i % 8 == 7) {
      w.u8(acc);
      acc = 0;
    }
  }
  if (bits.size() % 8 != 0) w.u8(acc);
}

inline std::vector<std::uint8_t> unpack_bits(ByteReader& r, std::size_t n) {
  std::vector<std::uint8_t> bits(n);
  auto raw = r.raw((n + 7) / 8);
  for (std::size_t i = 0; i < n; ++i) bits[i] = (raw[i / 8] >> (i % 8)) & 1U;
  return bits;
}

}  // namespace propattest::mpc

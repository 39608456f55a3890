#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "propattest/common/rng.hpp"
#include "propattest/mpc/ring.hpp"

namespace propattest::mpc {

struct SharedVector {
  int party = 1;  // 1 or 2
  std::vector<Ring> shares;
  int frac_bits = kDefaultFracBits;
  int ring_bits = kRingBits;

  std::size_t size() const { return shares.size(); }
  friend bool operator==(const SharedVector&, const SharedVector&) = default;
};

using SharePair = std::pair<SharedVector, SharedVector>;

// Share 1 is uniform from `rng`; share 2 completes the encoding.
SharePair share_encoded(std::span<const Ring> encoded, ChaChaRng& rng, int frac_bits = kDefaultFracBits,
                        int ring_bits = kRingBits);
SharePair share(std::span<const double> x, int frac_bits, ChaChaRng& rng, int ring_bits = kRingBits);

std::vector<Ring> reconstruct_raw(const SharedVector& s1, const SharedVector& s2);
std::vector<double> reconstruct(const SharedVector& s1, const SharedVector& s2);

// Local operations; no communication.
SharedVector add_shares(const SharedVector& a, const SharedVector& b);
SharedVector sub_shares(const SharedVector& a, const SharedVector& b);
// Only party 1 adds the public value; party 2 returns its share unchanged.
SharedVector add_public(const SharedVector& s, std::span<const Ring> encoded);
SharedVector add_public(const SharedVector& s, std::span<const double> values);
// Integer scaling, no truncation.
SharedVector scale_public(const SharedVector& s, std::int64_t c);
SharedVector negate(const SharedVector& s);

}  // namespace propattest::mpc

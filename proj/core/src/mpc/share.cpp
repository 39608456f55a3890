#include "propattest/mpc/share.hpp"

#include "propattest/common/error.hpp"

namespace propattest::mpc {

namespace {

void check_meta(const SharedVector& a, const SharedVector& b) {
  if (a.size() != b.size()) throw ShapeMismatch("shared vectors differ in length");
  if (a.frac_bits != b.frac_bits || a.ring_bits != b.ring_bits) throw InvalidArgument("shared vectors differ in encoding");
}

void check_ring(int ring_bits) {
  if (ring_bits < 2 || ring_bits > 64) throw InvalidArgument("ring size must be between 2 and 64 bits");
}

}  // namespace

SharePair share_encoded(std::span<const Ring> encoded, ChaChaRng& rng, int frac_bits, int ring_bits) {
  check_ring(ring_bits);
  const Ring mask = ring_mask(ring_bits);
  SharePair out{{1, {}, frac_bits, ring_bits}, {2, {}, frac_bits, ring_bits}};
  out.first.shares.reserve(encoded.size());
  out.second.shares.reserve(encoded.size());
  for (Ring v : encoded) {
    Ring r = rng() & mask;
    out.first.shares.push_back(r);
    out.second.shares.push_back((v - r) & mask);
  }
  return out;
}

SharePair share(std::span<const double> x, int frac_bits, ChaChaRng& rng, int ring_bits) {
  check_ring(ring_bits);
  FixedPoint fx{frac_bits, ring_bits};
  auto enc = fx.encode(x);
  return share_encoded(enc, rng, frac_bits, ring_bits);
}

std::vector<Ring> reconstruct_raw(const SharedVector& s1, const SharedVector& s2) {
  check_meta(s1, s2);
  if (s1.party != 1 || s2.party != 2) throw InvalidArgument("reconstruct needs one share from each party");
  const Ring mask = ring_mask(s1.ring_bits);
  std::vector<Ring> out(s1.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (s1.shares[i] + s2.shares[i]) & mask;
  return out;
}

std::vector<double> reconstruct(const SharedVector& s1, const SharedVector& s2) {
  auto raw = reconstruct_raw(s1, s2);
  return FixedPoint{s1.frac_bits, s1.ring_bits}.decode(raw);
}

SharedVector add_shares(const SharedVector& a, const SharedVector& b) {
  check_meta(a, b);
  if (a.party != b.party) throw InvalidArgument("cannot add shares held by different parties");
  SharedVector out = a;
  const Ring mask = ring_mask(a.ring_bits);
  for (std::size_t i = 0; i < out.size(); ++i) out.shares[i] = (a.shares[i] + b.shares[i]) & mask;
  return out;
}

SharedVector sub_shares(const SharedVector& a, const SharedVector& b) {
  check_meta(a, b);
  if (a.party != b.party) throw InvalidArgument("cannot subtract shares held by different parties");
  SharedVector out = a;
  const Ring mask = ring_mask(a.ring_bits);
  for (std::size_t i = 0; i < out.size(); ++i) out.shares[i] = (a.shares[i] - b.shares[i]) & mask;
  return out;
}

SharedVector add_public(const SharedVector& s, std::span<const Ring> encoded) {
  if (encoded.size() != s.size()) throw ShapeMismatch("public vector length differs from shares");
  SharedVector out = s;
  if (s.party != 1) return out;
  const Ring mask = ring_mask(s.ring_bits);
  for (std::size_t i = 0; i < out.size(); ++i) out.shares[i] = (out.shares[i] + encoded[i]) & mask;
  return out;
}

SharedVector add_public(const SharedVector& s, std::span<const double> values) {
  auto enc = FixedPoint{s.frac_bits, s.ring_bits}.encode(values);
  return add_public(s, enc);
}

SharedVector scale_public(const SharedVector& s, std::int64_t c) {
  SharedVector out = s;
  const Ring mask = ring_mask(s.ring_bits);
  for (auto& v : out.shares) v = (v * static_cast<Ring>(c)) & mask;
  return out;
}

SharedVector negate(const SharedVector& s) { return scale_public(s, -1); }

}  // namespace propattest::mpc

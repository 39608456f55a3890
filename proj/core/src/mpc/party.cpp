#include "propattest/mpc/party.hpp"

#include <algorithm>

#include "propattest/mpc/bits.hpp"

namespace propattest::mpc {

namespace {

void require_full_ring(const SharedVector& s) {
  if (s.ring_bits != kRingBits) throw InvalidArgument("interactive operations need the 64-bit ring");
}

void require_owner(const Party& p, const SharedVector& s) {
  if (s.party != p.id()) throw InvalidArgument("share belongs to the other party");
  require_full_ring(s);
}

void require_material(const Party& p, const Material& m, MaterialKind kind) {
  if (m.request.kind != kind) throw InvalidArgument("wrong kind of dealer material");
  if (m.party != p.id()) throw InvalidArgument("dealer material belongs to the other party");
}

SharedVector with_values(int party, std::vector<Ring> v, int frac_bits) {
  return SharedVector{party, std::move(v), frac_bits, kRingBits};
}

// Naive ring matmul; dimensions are small.
std::vector<Ring> ring_matmul(std::span<const Ring> a, std::span<const Ring> b, std::size_t rows, std::size_t inner,
                              std::size_t cols) {
  std::vector<Ring> out(rows * cols, 0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t k = 0; k < inner; ++k) {
      Ring aik = a[i * inner + k];
      for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] += aik * b[k * cols + j];
    }
  return out;
}

BitShares lt_batch(Party& p, std::span<const Ring> c, std::span<const Ring> r_bits, std::span<const int> widths) {
  const std::size_t n = c.size();
  const bool p1 = p.id() == 1;
  // Per element, a list of (G, E) nodes, least significant first.
  std::vector<std::vector<std::uint8_t>> g(n), e(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (int i = 0; i < widths[j]; ++i) {
      std::uint8_t ci = (c[j] >> i) & 1U;
      std::uint8_t ri = (r_bits[j] >> i) & 1U;
      g[j].push_back(ci ? 0 : ri);
      e[j].push_back(static_cast<std::uint8_t>(p1 ? (ri ^ ci ^ 1U) : ri));
    }
  }

  for (;;) {
    BitShares lhs{p.id(), {}}, rhs{p.id(), {}};
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t len = g[j].size();
      for (std::size_t k = 0; k + 1 < len; k += 2) {
        lhs.bits.push_back(e[j][k + 1]);
        rhs.bits.push_back(g[j][k]);
        if (len > 2) {
          lhs.bits.push_back(e[j][k + 1]);
          rhs.bits.push_back(e[j][k]);
        }
      }
    }
    if (lhs.bits.empty()) break;
    BitShares prod = and_bits(p, lhs, rhs);
    std::size_t at = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t len = g[j].size();
      if (len < 2) continue;
      std::vector<std::uint8_t> ng, ne;
      for (std::size_t k = 0; k + 1 < len; k += 2) {
        ng.push_back(static_cast<std::uint8_t>(g[j][k + 1] ^ prod.bits[at++]));
        ne.push_back(len > 2 ? prod.bits[at++] : 0);
      }
      if (len % 2 == 1) {
        ng.push_back(g[j].back());
        ne.push_back(e[j].back());
      }
      g[j] = std::move(ng);
      e[j] = std::move(ne);
    }
  }

  BitShares out{p.id(), std::vector<std::uint8_t>(n, 0)};
  for (std::size_t j = 0; j < n; ++j)
    if (!g[j].empty()) out.bits[j] = g[j].front();
  return out;
}

}  // namespace

std::vector<std::uint8_t> reconstruct_bits(const BitShares& s1, const BitShares& s2) {
  if (s1.size() != s2.size()) throw ShapeMismatch("bit shares differ in length");
  if (s1.party != 1 || s2.party != 2) throw InvalidArgument("reconstruct needs one share from each party");
  std::vector<std::uint8_t> out(s1.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<std::uint8_t>((s1.bits[i] ^ s2.bits[i]) & 1U);
  return out;
}

Party::Party(int id, Channel& peer, MaterialSource& dealer) : id_(id), peer_(peer), dealer_(dealer) {
  if (id != 1 && id != 2) throw InvalidArgument("party id must be 1 or 2");
}

Material Party::take(const MaterialRequest& req) {
  Material m = dealer_.fetch(req);
  if (m.party != id_) throw ProtocolError("dealer sent material for the other party");
  consume(m);
  return m;
}

void Party::consume(const Material& m) {
  if (!used_.insert(m.id).second) throw TripleReuse("dealer material " + std::to_string(m.id) + " used twice");
}

Bytes Party::exchange(std::string_view tag, Bytes mine) {
  ++rounds_;
  if (id_ == 1) {
    peer_.send(tag, std::move(mine));
    return peer_.recv_expect(tag);
  }
  Bytes theirs = peer_.recv_expect(tag);
  peer_.send(tag, std::move(mine));
  return theirs;
}

std::vector<Ring> Party::open(std::string_view tag, std::span<const Ring> mine) {
  ByteWriter w;
  w.u64s(mine);
  Bytes theirs = exchange(tag, std::move(w).take());
  if (theirs.size() != mine.size() * 8) throw ProtocolError("opening has the wrong length");
  ByteReader r(theirs);
  auto other = r.u64s(mine.size());
  for (std::size_t i = 0; i < other.size(); ++i) other[i] += mine[i];
  return other;
}

std::vector<std::uint8_t> Party::open_bits(std::string_view tag, std::span<const std::uint8_t> mine) {
  ByteWriter w;
  pack_bits(w, mine);
  Bytes theirs = exchange(tag, std::move(w).take());
  if (theirs.size() != (mine.size() + 7) / 8) throw ProtocolError("bit opening has the wrong length");
  ByteReader r(theirs);
  auto other = unpack_bits(r, mine.size());
  for (std::size_t i = 0; i < other.size(); ++i) other[i] ^= mine[i] & 1U;
  return other;
}

SharedVector public_shares(int party, std::span<const Ring> values, int frac_bits) {
  std::vector<Ring> v(values.size(), 0);
  if (party == 1) std::copy(values.begin(), values.end(), v.begin());
  return with_values(party, std::move(v), frac_bits);
}

SharedVector beaver_mul(Party& p, const SharedVector& x, const SharedVector& y, const Material& triple) {
  require_owner(p, x);
  require_owner(p, y);
  if (x.size() != y.size()) throw ShapeMismatch("beaver_mul operands differ in length");
  require_material(p, triple, MaterialKind::kElemTriple);
  if (triple.request.count != x.size()) throw ShapeMismatch("triple does not match operand length");
  p.consume(triple);

  const std::size_t n = x.size();
  std::vector<Ring> masked(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    masked[i] = x.shares[i] - triple.a[i];
    masked[n + i] = y.shares[i] - triple.b[i];
  }
  auto opened = p.open("MULX", masked);
  std::vector<Ring> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    Ring e = opened[i], f = opened[n + i];
    z[i] = triple.c[i] + e * triple.b[i] + f * triple.a[i] + (p.id() == 1 ? e * f : 0);
  }
  const int shift = std::min(x.frac_bits, y.frac_bits);
  auto out = with_values(p.id(), std::move(z), x.frac_bits + y.frac_bits);
  out = truncate(p, out, shift);
  out.frac_bits = std::max(x.frac_bits, y.frac_bits);
  return out;
}

SharedVector mul(Party& p, const SharedVector& x, const SharedVector& y) {
  auto triple = p.dealer().fetch(MaterialRequest::elem_triples(static_cast<std::uint32_t>(x.size())));
  return beaver_mul(p, x, y, triple);
}

SharedVector beaver_matmul(Party& p, const SharedVector& x, const SharedVector& y, std::size_t rows,
                           std::size_t inner, std::size_t cols, const Material& triple) {
  require_owner(p, x);
  require_owner(p, y);
  if (x.size() != rows * inner || y.size() != inner * cols) throw ShapeMismatch("matmul operand shapes disagree");
  require_material(p, triple, MaterialKind::kMatTriple);
  if (triple.request.rows != rows || triple.request.inner != inner || triple.request.cols != cols) {
    throw ShapeMismatch("matrix triple does not match operand shapes");
  }
  p.consume(triple);

  std::vector<Ring> masked(x.size() + y.size());
  for (std::size_t i = 0; i < x.size(); ++i) masked[i] = x.shares[i] - triple.a[i];
  for (std::size_t i = 0; i < y.size(); ++i) masked[x.size() + i] = y.shares[i] - triple.b[i];
  auto opened = p.open("MULX", masked);
  std::span<const Ring> e(opened.data(), x.size());
  std::span<const Ring> f(opened.data() + x.size(), y.size());

  auto z = triple.c;
  auto eb = ring_matmul(e, triple.b, rows, inner, cols);
  auto af = ring_matmul(triple.a, f, rows, inner, cols);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] += eb[i] + af[i];
  if (p.id() == 1) {
    auto ef = ring_matmul(e, f, rows, inner, cols);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += ef[i];
  }
  const int shift = std::min(x.frac_bits, y.frac_bits);
  auto out = with_values(p.id(), std::move(z), x.frac_bits + y.frac_bits);
  out = truncate(p, out, shift);
  out.frac_bits = std::max(x.frac_bits, y.frac_bits);
  return out;
}

SharedVector matmul(Party& p, const SharedVector& x, const SharedVector& y, std::size_t rows, std::size_t inner,
                    std::size_t cols) {
  auto triple = p.dealer().fetch(MaterialRequest::mat_triple(static_cast<std::uint32_t>(rows),
                                                             static_cast<std::uint32_t>(inner),
                                                             static_cast<std::uint32_t>(cols)));
  return beaver_matmul(p, x, y, rows, inner, cols, triple);
}

SharedVector truncate(Party& p, const SharedVector& z, int f) {
  require_owner(p, z);
  if (f == 0 || z.size() == 0) {
    SharedVector out = z;
    out.frac_bits = z.frac_bits - f;
    return out;
  }
  if (f < 0 || f >= 62) throw InvalidArgument("truncation width out of range");
  const std::size_t n = z.size();
  const bool p1 = p.id() == 1;
  constexpr Ring kBias = Ring{1} << 62;

  Material mask = p.take(MaterialRequest::masks(static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(f)));
  std::vector<Ring> masked(n);
  for (std::size_t i = 0; i < n; ++i) masked[i] = z.shares[i] + (p1 ? kBias : 0) + mask.a[i];
  auto c = p.open("MASK", masked);

  // wrap = [c < r] over 64 bits, borrow = [c mod 2^f < r mod 2^f].
  std::vector<Ring> cc(2 * n), rr(2 * n);
  std::vector<int> widths(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    cc[i] = cc[n + i] = c[i];
    rr[i] = rr[n + i] = mask.b[i];
    widths[i] = 64;
    widths[n + i] = f;
  }
  auto cmp = bits_to_arith(p, lt_batch(p, cc, rr, widths));

  std::vector<Ring> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Ring wrap = cmp.shares[i], borrow = cmp.shares[n + i];
    Ring v = (wrap << (64 - f)) - mask.c[i] - borrow;
    if (p1) v += (c[i] >> f) - (kBias >> f);
    out[i] = v;
  }
  return with_values(p.id(), std::move(out), z.frac_bits - f);
}

BitShares and_bits(Party& p, const BitShares& x, const BitShares& y) {
  if (x.size() != y.size()) throw ShapeMismatch("and_bits operands differ in length");
  if (x.party != p.id() || y.party != p.id()) throw InvalidArgument("bit share belongs to the other party");
  const std::size_t n = x.size();
  if (n == 0) return {p.id(), {}};
  Material t = p.take(MaterialRequest::bit_triples(static_cast<std::uint32_t>(n)));
  std::vector<std::uint8_t> masked(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    masked[i] = static_cast<std::uint8_t>((x.bits[i] ^ t.u[i]) & 1U);
    masked[n + i] = static_cast<std::uint8_t>((y.bits[i] ^ t.v[i]) & 1U);
  }
  auto opened = p.open_bits("CMPB", masked);
  BitShares out{p.id(), std::vector<std::uint8_t>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    std::uint8_t e = opened[i], f = opened[n + i];
    std::uint8_t z = t.w[i] ^ (e & t.v[i]) ^ (f & t.u[i]);
    if (p.id() == 1) z ^= e & f;
    out.bits[i] = z;
  }
  return out;
}

BitShares less_than_public(Party& p, std::span<const Ring> c, std::span<const Ring> r_bits, int m) {
  if (c.size() != r_bits.size()) throw ShapeMismatch("less_than_public inputs differ in length");
  if (m < 0 || m > 64) throw InvalidArgument("comparison width out of range");
  std::vector<int> widths(c.size(), m);
  return lt_batch(p, c, r_bits, widths);
}

SharedVector bits_to_arith(Party& p, const BitShares& b) {
  if (b.party != p.id()) throw InvalidArgument("bit share belongs to the other party");
  const std::size_t n = b.size();
  if (n == 0) return with_values(p.id(), {}, 0);
  Material d = p.take(MaterialRequest::dabits(static_cast<std::uint32_t>(n)));
  std::vector<std::uint8_t> masked(n);
  for (std::size_t i = 0; i < n; ++i) masked[i] = static_cast<std::uint8_t>((b.bits[i] ^ d.u[i]) & 1U);
  auto e = p.open_bits("CMPB", masked);
  std::vector<Ring> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    // b = e XOR s = e + (1 - 2e) s
    out[i] = e[i] ? Ring{0} - d.a[i] : d.a[i];
    if (p.id() == 1) out[i] += e[i];
  }
  return with_values(p.id(), std::move(out), 0);
}

BitShares secure_compare(Party& p, const SharedVector& x, const SharedVector& y) {
  require_owner(p, x);
  require_owner(p, y);
  if (x.size() != y.size()) throw ShapeMismatch("secure_compare operands differ in length");
  if (x.frac_bits != y.frac_bits) throw InvalidArgument("secure_compare operands differ in encoding");
  const std::size_t n = x.size();
  if (n == 0) return {p.id(), {}};
  Material mask = p.take(MaterialRequest::masks(static_cast<std::uint32_t>(n), 0));
  std::vector<Ring> masked(n);
  for (std::size_t i = 0; i < n; ++i) masked[i] = x.shares[i] - y.shares[i] + mask.a[i];
  auto c = p.open("MASK", masked);
  // msb(d) = msb(c) ^ msb(r) ^ [c mod 2^63 < r mod 2^63]
  auto carry = less_than_public(p, c, mask.b, 63);
  BitShares out{p.id(), std::vector<std::uint8_t>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    std::uint8_t bit = static_cast<std::uint8_t>(((mask.b[i] >> 63) & 1U) ^ carry.bits[i]);
    if (p.id() == 1) bit ^= static_cast<std::uint8_t>(((c[i] >> 63) & 1U) ^ 1U);
    out.bits[i] = bit;
  }
  return out;
}

}  // namespace propattest::mpc

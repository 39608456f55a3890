#include "propattest/mpc/dealer.hpp"

#include "propattest/common/rng.hpp"
#include "propattest/mpc/bits.hpp"

namespace propattest::mpc {

namespace {

struct Sizes {
  std::size_t a = 0, b = 0, c = 0, bits = 0;
};

Sizes sizes_for(const MaterialRequest& q) {
  const std::size_t n = q.count;
  switch (q.kind) {
    case MaterialKind::kElemTriple:
      return {n, n, n, 0};
    case MaterialKind::kMatTriple:
      return {std::size_t{q.rows} * q.inner, std::size_t{q.inner} * q.cols, std::size_t{q.rows} * q.cols, 0};
    case MaterialKind::kBitTriple:
      return {0, 0, 0, n};
    case MaterialKind::kDaBit:
      return {n, 0, 0, n};
    case MaterialKind::kEdaMask:
      return {n, n, n, 0};
  }
  throw InvalidArgument("unknown material kind");
}

void validate(const MaterialRequest& q) {
  sizes_for(q);
  if (q.kind == MaterialKind::kEdaMask && q.frac_bits >= 62) throw InvalidArgument("mask fraction bits too large");
  if (q.kind == MaterialKind::kMatTriple && (q.rows == 0 || q.inner == 0 || q.cols == 0)) {
    throw InvalidArgument("matrix triple needs positive dimensions");
  }
}

void write_request(ByteWriter& w, const MaterialRequest& q) {
  w.u8(static_cast<std::uint8_t>(q.kind));
  w.u32(q.count);
  w.u32(q.rows);
  w.u32(q.inner);
  w.u32(q.cols);
  w.u32(q.frac_bits);
}

MaterialRequest read_request(ByteReader& r) {
  MaterialRequest q;
  q.kind = static_cast<MaterialKind>(r.u8());
  q.count = r.u32();
  q.rows = r.u32();
  q.inner = r.u32();
  q.cols = r.u32();
  q.frac_bits = r.u32();
  validate(q);
  return q;
}

// Splits `value` into two additive shares using `rng`.
void split(ChaChaRng& rng, Ring value, std::vector<Ring>& s1, std::vector<Ring>& s2) {
  Ring m = rng();
  s1.push_back(m);
  s2.push_back(value - m);
}

void split_bit(ChaChaRng& rng, std::uint8_t value, std::vector<std::uint8_t>& s1, std::vector<std::uint8_t>& s2) {
  std::uint8_t m = rng.bit();
  s1.push_back(m);
  s2.push_back(static_cast<std::uint8_t>(value ^ m));
}

}  // namespace

void write_material(ByteWriter& w, const Material& m) {
  write_request(w, m.request);
  w.u64(m.id);
  w.u8(static_cast<std::uint8_t>(m.party));
  w.u64s(m.a);
  w.u64s(m.b);
  w.u64s(m.c);
  pack_bits(w, m.u);
  pack_bits(w, m.v);
  pack_bits(w, m.w);
}

Material read_material(ByteReader& r) {
  Material m;
  m.request = read_request(r);
  m.id = r.u64();
  m.party = r.u8();
  if (m.party != 1 && m.party != 2) throw IoError("material party must be 1 or 2");
  Sizes s = sizes_for(m.request);
  m.a = r.u64s(s.a);
  m.b = r.u64s(s.b);
  m.c = r.u64s(s.c);
  m.u = unpack_bits(r, s.bits);
  bool triple_bits = m.request.kind == MaterialKind::kBitTriple;
  m.v = unpack_bits(r, triple_bits ? s.bits : 0);
  m.w = unpack_bits(r, triple_bits ? s.bits : 0);
  return m;
}

std::pair<Material, Material> Dealer::generate(const MaterialRequest& req, std::uint64_t index) const {
  validate(req);
  ChaChaRng rng(derive_seed(seed_, static_cast<std::uint64_t>(req.kind), index), "dealer");
  Material p1, p2;
  p1.id = p2.id = index;
  p1.party = 1;
  p2.party = 2;
  p1.request = p2.request = req;
  const std::size_t n = req.count;

  switch (req.kind) {
    case MaterialKind::kElemTriple:
      for (std::size_t i = 0; i < n; ++i) {
        Ring a = rng(), b = rng();
        split(rng, a, p1.a, p2.a);
        split(rng, b, p1.b, p2.b);
        split(rng, a * b, p1.c, p2.c);
      }
      break;
    case MaterialKind::kMatTriple: {
      const std::size_t rows = req.rows, inner = req.inner, cols = req.cols;
      std::vector<Ring> A(rows * inner), B(inner * cols), C(rows * cols, 0);
      for (auto& x : A) x = rng();
      for (auto& x : B) x = rng();
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t k = 0; k < inner; ++k)
          for (std::size_t j = 0; j < cols; ++j) C[i * cols + j] += A[i * inner + k] * B[k * cols + j];
      for (Ring x : A) split(rng, x, p1.a, p2.a);
      for (Ring x : B) split(rng, x, p1.b, p2.b);
      for (Ring x : C) split(rng, x, p1.c, p2.c);
      break;
    }
    case MaterialKind::kBitTriple:
      for (std::size_t i = 0; i < n; ++i) {
        std::uint8_t x = rng.bit(), y = rng.bit();
        split_bit(rng, x, p1.u, p2.u);
        split_bit(rng, y, p1.v, p2.v);
        split_bit(rng, static_cast<std::uint8_t>(x & y), p1.w, p2.w);
      }
      break;
    case MaterialKind::kDaBit:
      for (std::size_t i = 0; i < n; ++i) {
        std::uint8_t x = rng.bit();
        split_bit(rng, x, p1.u, p2.u);
        split(rng, x, p1.a, p2.a);
      }
      break;
    case MaterialKind::kEdaMask:
      for (std::size_t i = 0; i < n; ++i) {
        Ring r = rng();
        split(rng, r, p1.a, p2.a);
        Ring m = rng();
        p1.b.push_back(m);
        p2.b.push_back(r ^ m);
        split(rng, r >> req.frac_bits, p1.c, p2.c);
      }
      break;
  }
  return {std::move(p1), std::move(p2)};
}

DealerBatch dealer_gen(std::size_t count, const MaterialRequest& req, std::uint64_t seed) {
  Dealer dealer(seed);
  DealerBatch out;
  out.seed = seed;
  for (std::size_t i = 0; i < count; ++i) {
    auto [m1, m2] = dealer.generate(req, i);
    out.party1.push_back(std::move(m1));
    out.party2.push_back(std::move(m2));
  }
  return out;
}

Bytes serialize_materials(int party, std::uint64_t seed, std::span<const Material> items) {
  ByteWriter w;
  w.magic("DLR1");
  w.u8(static_cast<std::uint8_t>(party));
  w.u64(seed);
  w.u64(items.size());
  for (const auto& m : items) {
    if (m.party != party) throw InvalidArgument("material belongs to a different party");
    write_material(w, m);
  }
  return std::move(w).take();
}

std::pair<std::uint64_t, std::vector<Material>> deserialize_materials(std::span<const std::uint8_t> bytes,
                                                                      int expected_party) {
  ByteReader r(bytes);
  r.expect_magic("DLR1");
  int party = r.u8();
  if (party != expected_party) throw IoError("material file is for party " + std::to_string(party));
  std::uint64_t seed = r.u64();
  std::uint64_t count = r.u64();
  std::vector<Material> items;
  for (std::uint64_t i = 0; i < count; ++i) {
    items.push_back(read_material(r));
    if (items.back().party != party) throw IoError("material party disagrees with file header");
  }
  r.expect_done();
  return {seed, std::move(items)};
}

Material MaterialSource::fetch(const MaterialRequest& req) {
  Material m = produce(req, consumed_);
  if (m.request != req || m.id != consumed_) throw ProtocolError("dealer returned material of the wrong shape");
  ++consumed_;
  return m;
}

Material LocalDealerSource::produce(const MaterialRequest& req, std::uint64_t index) {
  auto pair = dealer_->generate(req, index);
  return party_ == 1 ? std::move(pair.first) : std::move(pair.second);
}

Material RemoteDealerSource::produce(const MaterialRequest& req, std::uint64_t index) {
  ByteWriter w;
  write_request(w, req);
  w.u64(index);
  ch_.send("DREQ", std::move(w).take());
  Bytes payload = ch_.recv_expect("DMAT");
  try {
    auto [seed, items] = deserialize_materials(payload, party_);
    (void)seed;
    if (items.size() != 1) throw ProtocolError("dealer reply must hold exactly one item");
    return std::move(items.front());
  } catch (const IoError& e) {
    throw ProtocolError(std::string("malformed dealer reply: ") + e.what());
  }
}

void RemoteDealerSource::finish() { ch_.send("DEND", {}); }

std::uint64_t serve_dealer(const Dealer& dealer, Channel& ch, int party) {
  std::uint64_t served = 0;
  for (;;) {
    Message m;
    try {
      m = ch.recv();
    } catch (const ChannelError&) {
      return served;
    }
    if (m.tag == "DEND" || m.tag == "ABRT") return served;
    if (m.tag != "DREQ") {
      ch.send_abort("dealer expected a request");
      throw ProtocolError("dealer received " + m.tag);
    }
    MaterialRequest req;
    std::uint64_t index = 0;
    try {
      ByteReader r(m.payload);
      req = read_request(r);
      index = r.u64();
      r.expect_done();
    } catch (const Error& e) {
      ch.send_abort("malformed dealer request");
      throw ProtocolError(std::string("malformed dealer request: ") + e.what());
    }
    auto pair = dealer.generate(req, index);
    Material item = party == 1 ? std::move(pair.first) : std::move(pair.second);
    ch.send("DMAT", serialize_materials(party, dealer.seed(), std::span<const Material>(&item, 1)));
    ++served;
  }
}

}  // namespace propattest::mpc

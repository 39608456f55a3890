#include <gtest/gtest.h>

#include <future>
#include <random>
#include <thread>

#include "oracles.hpp"
#include "propattest/common/error.hpp"
#include "propattest/mpc/bits.hpp"
#include "propattest/mpc/share.hpp"
#include "two_party.hpp"

namespace propattest::mpc {
namespace {

using propattest::testing::run_two_party;

TEST(FixedPoint, EncodeDecodeAndRange) {
  FixedPoint fx{16};
  EXPECT_EQ(fx.encode(1.0), Ring{1} << 16);
  EXPECT_EQ(fx.decode(fx.encode(-2.5)), -2.5);
  EXPECT_NEAR(fx.decode(fx.encode(0.1)), 0.1, std::ldexp(1.0, -17));
  EXPECT_THROW(fx.encode(std::ldexp(1.0, 46)), InvalidArgument);
  EXPECT_THROW(fx.encode(std::nan("")), InvalidArgument);
  EXPECT_EQ(truncate_plain(fx.encode(-1.5), 16), static_cast<Ring>(-2));
}

TEST(Share, ReconstructsAndSupportsLinearOps) {
  ChaChaRng rng(5);
  std::vector<double> x{1.5, -2.25, 0.0, 1000.0}, y{0.5, 0.25, -3.0, 1.0};
  auto [x1, x2] = share(x, 16, rng);
  auto [y1, y2] = share(y, 16, rng);
  EXPECT_EQ(reconstruct(x1, x2), x);
  auto s = reconstruct(add_shares(x1, y1), add_shares(x2, y2));
  auto d = reconstruct(sub_shares(x1, y1), sub_shares(x2, y2));
  auto k = reconstruct(scale_public(x1, -3), scale_public(x2, -3));
  auto p = reconstruct(add_public(x1, std::span<const double>(y)), add_public(x2, std::span<const double>(y)));
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(s[i], x[i] + y[i]);
    EXPECT_EQ(d[i], x[i] - y[i]);
    EXPECT_EQ(k[i], -3 * x[i]);
    EXPECT_EQ(p[i], x[i] + y[i]);
  }
  EXPECT_THROW(reconstruct(x1, x1), InvalidArgument);
}

TEST(Share, SingleShareIsUniform) {
  // Constant secret: share 1 should look uniform, and share 2 = secret - share 1
  // as well. Chi-square with 255 degrees of freedom; the 0.999 quantile is
  // about 330.5.
  ChaChaRng rng(17);
  std::vector<Ring> secret(100000, 42);
  auto [s1, s2] = share_encoded(secret, rng);
  for (int byte : {0, 3, 7}) {
    EXPECT_LT(oracle::chi_square_bytes(s1.shares, byte), 330.5) << "byte " << byte;
    EXPECT_LT(oracle::chi_square_bytes(s2.shares, byte), 330.5) << "byte " << byte;
  }
}

TEST(Bits, PackRoundTrip) {
  std::vector<std::uint8_t> bits{1, 0, 1, 1, 0, 0, 0, 1, 1, 0, 1};
  ByteWriter w;
  pack_bits(w, bits);
  EXPECT_EQ(w.bytes().size(), 2u);
  ByteReader r(w.bytes());
  EXPECT_EQ(unpack_bits(r, bits.size()), bits);
}

TEST(Channel, FramesRoundTripAndCountBytes) {
  auto [a, b] = make_channel_pair();
  a->send("MULX", Bytes{1, 2, 3});
  auto m = b->recv();
  EXPECT_EQ(m.tag, "MULX");
  EXPECT_EQ(m.payload, (Bytes{1, 2, 3}));
  EXPECT_EQ(a->bytes_sent(), kHeaderBytes + 3);
  EXPECT_EQ(b->bytes_received(), kHeaderBytes + 3);
  EXPECT_EQ(encode_frame({"OUTV", {9}}).size(), kHeaderBytes + 1);
}

TEST(Channel, UnknownTagAndAbortAreRejected) {
  auto [a, b] = make_channel_pair();
  EXPECT_THROW(a->send("ZZZZ", {}), InvalidArgument);
  EXPECT_FALSE(is_known_tag("ZZZZ"));
  a->send("MASK", {});
  EXPECT_THROW(b->recv_expect("MULX"), ProtocolError);
  a->send_abort("stop");
  EXPECT_THROW(b->recv_expect("MULX"), ProtocolAbort);
}

TEST(Channel, MalformedFramesFromTheWireAreProtocolErrors) {
  auto in = std::make_shared<BytePipe>();
  InProcessChannel ch(std::make_shared<BytePipe>(), in);
  Bytes frame{'Z', 'Z', 'Z', 'Z', 0, 0, 0, 0, 0, 0, 0, 0};
  in->write(frame);
  EXPECT_THROW(ch.recv(), ProtocolError);
  Bytes huge{'M', 'U', 'L', 'X', 0, 0, 0, 0, 2, 0, 0, 0};
  in->write(huge);
  EXPECT_THROW(ch.recv(), ProtocolError);
}

TEST(Channel, ClosedAndTimedOutReadsFail) {
  auto [a, b] = make_channel_pair();
  b->set_timeout(std::chrono::milliseconds(50));
  EXPECT_THROW(b->recv(), ChannelError);
  a->close();
  EXPECT_THROW(b->recv(), ChannelError);
}

TEST(Channel, TcpLoopback) {
  TcpListener listener(0);
  auto fut = std::async(std::launch::async, [&] { return listener.accept(std::chrono::seconds(5)); });
  auto client = TcpChannel::connect("127.0.0.1", listener.port());
  auto server = fut.get();
  Bytes big(100000, 7);
  client->send("INPD", big);
  auto m = server->recv();
  EXPECT_EQ(m.tag, "INPD");
  EXPECT_EQ(m.payload, big);
  server->send("OUTV", {1});
  EXPECT_EQ(client->recv_expect("OUTV"), (Bytes{1}));
  EXPECT_EQ(parse_endpoint("10.0.0.1:80"), (std::pair<std::string, std::uint16_t>{"10.0.0.1", 80}));
  EXPECT_THROW(parse_endpoint("nohost"), InvalidArgument);
}

TEST(Dealer, DeterministicCorrelatedAndSeedSeparated) {
  Dealer d(7);
  auto [a1, a2] = d.generate(MaterialRequest::elem_triples(50), 3);
  auto [b1, b2] = Dealer(7).generate(MaterialRequest::elem_triples(50), 3);
  EXPECT_EQ(a1, b1);
  EXPECT_EQ(a2, b2);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ((a1.a[i] + a2.a[i]) * (a1.b[i] + a2.b[i]), a1.c[i] + a2.c[i]);
  auto [c1, c2] = Dealer(8).generate(MaterialRequest::elem_triples(50), 3);
  auto [e1, e2] = d.generate(MaterialRequest::elem_triples(50), 4);
  EXPECT_NE(c1.a, a1.a);
  EXPECT_NE(e1.a, a1.a);
}

TEST(Dealer, MaterialKindsSatisfyTheirRelations) {
  Dealer d(11);
  auto [m1, m2] = d.generate(MaterialRequest::mat_triple(3, 4, 2), 0);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 2; ++c) {
      Ring acc = 0;
      for (std::size_t k = 0; k < 4; ++k) acc += (m1.a[r * 4 + k] + m2.a[r * 4 + k]) * (m1.b[k * 2 + c] + m2.b[k * 2 + c]);
      EXPECT_EQ(acc, m1.c[r * 2 + c] + m2.c[r * 2 + c]);
    }
  auto [t1, t2] = d.generate(MaterialRequest::bit_triples(64), 1);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ((t1.u[i] ^ t2.u[i]) & (t1.v[i] ^ t2.v[i]), t1.w[i] ^ t2.w[i]);
  auto [da1, da2] = d.generate(MaterialRequest::dabits(64), 2);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(Ring(da1.u[i] ^ da2.u[i]), da1.a[i] + da2.a[i]);
  auto [k1, k2] = d.generate(MaterialRequest::masks(16, 16), 3);
  for (std::size_t i = 0; i < 16; ++i) {
    Ring r = k1.a[i] + k2.a[i];
    EXPECT_EQ(k1.b[i] ^ k2.b[i], r);
    EXPECT_EQ(k1.c[i] + k2.c[i], r >> 16);
  }
}

TEST(Dealer, Dlr1RoundTripAndPartyCheck) {
  auto batch = dealer_gen(4, MaterialRequest::elem_triples(8), 21);
  ASSERT_EQ(batch.party1.size(), 4u);
  auto bytes = serialize_materials(1, 21, batch.party1);
  auto [seed, items] = deserialize_materials(bytes, 1);
  EXPECT_EQ(seed, 21u);
  EXPECT_EQ(items, batch.party1);
  EXPECT_THROW(deserialize_materials(bytes, 2), Error);
  bytes.pop_back();
  EXPECT_THROW(deserialize_materials(bytes, 1), Error);
}

TEST(Dealer, RemoteSourceMatchesLocal) {
  auto [srv, cli] = make_channel_pair();
  Dealer dealer(5);
  auto server = std::async(std::launch::async, [&] { return serve_dealer(dealer, *srv, 2); });
  RemoteDealerSource remote(*cli, 2);
  LocalDealerSource local(std::make_shared<const Dealer>(5), 2);
  for (int i = 0; i < 3; ++i) {
    auto req = MaterialRequest::masks(5, 16);
    EXPECT_EQ(remote.fetch(req), local.fetch(req));
  }
  remote.finish();
  EXPECT_EQ(server.get(), 3u);
}

TEST(Party, BeaverMultiplicationMatchesPlaintext) {
  FixedPoint fx{16};
  std::vector<double> x{1.5, -2.0, 3.25, -0.5}, y{2.0, 4.5, -1.0, -0.25};
  ChaChaRng rng(3);
  auto xs = share(x, 16, rng), ys = share(y, 16, rng);
  auto [o1, o2] = run_two_party([&](Party& p) {
    auto& xi = p.id() == 1 ? xs.first : xs.second;
    auto& yi = p.id() == 1 ? ys.first : ys.second;
    return mul(p, xi, yi);
  });
  auto raw = reconstruct_raw(o1, o2);
  for (std::size_t i = 0; i < x.size(); ++i)
    EXPECT_EQ(raw[i], truncate_plain(fx.encode(x[i]) * fx.encode(y[i]), 16)) << i;
}

TEST(Party, MatmulMatchesPlaintext) {
  FixedPoint fx{16};
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> ud(-3, 3);
  std::vector<double> a(6 * 5), b(5 * 2);
  for (auto& v : a) v = ud(gen);
  for (auto& v : b) v = ud(gen);
  ChaChaRng rng(4);
  auto as = share(a, 16, rng), bs = share(b, 16, rng);
  auto [o1, o2] = run_two_party([&](Party& p) {
    return matmul(p, p.id() == 1 ? as.first : as.second, p.id() == 1 ? bs.first : bs.second, 6, 5, 2);
  });
  auto raw = reconstruct_raw(o1, o2);
  auto ea = fx.encode(a), eb = fx.encode(b);
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 2; ++c) {
      Ring acc = 0;
      for (std::size_t k = 0; k < 5; ++k) acc += ea[r * 5 + k] * eb[k * 2 + c];
      EXPECT_EQ(raw[r * 2 + c], truncate_plain(acc, 16));
    }
}

TEST(Party, TruncationIsExactAcrossSigns) {
  std::mt19937_64 gen(8);
  std::vector<Ring> z;
  for (int i = 0; i < 500; ++i) z.push_back(static_cast<Ring>(static_cast<std::int64_t>(gen() >> 3) - (std::int64_t{1} << 60)));
  z.push_back(0);
  z.push_back(static_cast<Ring>(-1));
  ChaChaRng rng(2);
  auto zs = share_encoded(z, rng, 32);
  auto [o1, o2] = run_two_party([&](Party& p) { return truncate(p, p.id() == 1 ? zs.first : zs.second, 16); });
  auto raw = reconstruct_raw(o1, o2);
  for (std::size_t i = 0; i < z.size(); ++i) EXPECT_EQ(raw[i], truncate_plain(z[i], 16)) << i;
}

TEST(Party, ComparisonIsExhaustivelyCorrectOnSmallRange) {
  // Every pair (x, y) with x, y in [-16, 15], i.e. 2^10 pairs.
  std::vector<Ring> xs, ys;
  for (int x = -16; x < 16; ++x)
    for (int y = -16; y < 16; ++y) {
      xs.push_back(static_cast<Ring>(x));
      ys.push_back(static_cast<Ring>(y));
    }
  ChaChaRng rng(6);
  auto xsh = share_encoded(xs, rng, 0), ysh = share_encoded(ys, rng, 0);
  auto [b1, b2] = run_two_party([&](Party& p) {
    return secure_compare(p, p.id() == 1 ? xsh.first : xsh.second, p.id() == 1 ? ysh.first : ysh.second);
  });
  auto bits = reconstruct_bits(b1, b2);
  ASSERT_EQ(bits.size(), 1024u);
  for (std::size_t i = 0; i < bits.size(); ++i)
    EXPECT_EQ(bits[i], static_cast<std::int64_t>(xs[i]) >= static_cast<std::int64_t>(ys[i]) ? 1 : 0) << i;
}

TEST(Party, ComparisonHandlesLargeMagnitudes) {
  std::mt19937_64 gen(12);
  std::vector<Ring> xs, ys;
  for (int i = 0; i < 300; ++i) {
    xs.push_back(static_cast<Ring>(static_cast<std::int64_t>(gen() >> 4) - (std::int64_t{1} << 59)));
    ys.push_back(i % 7 == 0 ? xs.back() : static_cast<Ring>(static_cast<std::int64_t>(gen() >> 4) - (std::int64_t{1} << 59)));
  }
  ChaChaRng rng(1);
  auto xsh = share_encoded(xs, rng), ysh = share_encoded(ys, rng);
  auto [b1, b2] = run_two_party([&](Party& p) {
    return secure_compare(p, p.id() == 1 ? xsh.first : xsh.second, p.id() == 1 ? ysh.first : ysh.second);
  });
  auto bits = reconstruct_bits(b1, b2);
  for (std::size_t i = 0; i < bits.size(); ++i)
    EXPECT_EQ(bits[i], static_cast<std::int64_t>(xs[i]) >= static_cast<std::int64_t>(ys[i]) ? 1 : 0);
}

TEST(Party, BitOperations) {
  std::vector<std::uint8_t> x{0, 0, 1, 1}, y{0, 1, 0, 1};
  auto [r1, r2] = run_two_party([&](Party& p) {
    // Party 1 holds x and y in the clear, party 2 holds zeros.
    BitShares xs{p.id(), p.id() == 1 ? x : std::vector<std::uint8_t>(4)};
    BitShares ys{p.id(), p.id() == 1 ? y : std::vector<std::uint8_t>(4)};
    auto a = and_bits(p, xs, ys);
    return std::make_pair(a, bits_to_arith(p, a));
  });
  EXPECT_EQ(reconstruct_bits(r1.first, r2.first), (std::vector<std::uint8_t>{0, 0, 0, 1}));
  EXPECT_EQ(reconstruct_raw(r1.second, r2.second), (std::vector<Ring>{0, 0, 0, 1}));
}

TEST(Party, LessThanPublicMatchesPlaintext) {
  std::mt19937_64 gen(3);
  for (int m : {1, 2, 5, 16, 63, 64}) {
    std::vector<Ring> c(40), r(40);
    for (auto& v : c) v = gen();
    for (auto& v : r) v = gen();
    for (int i = 0; i < 5; ++i) c[i] = r[i];
    ChaChaRng rng(m);
    std::vector<Ring> r1(40), r2(40);
    for (std::size_t i = 0; i < 40; ++i) {
      r1[i] = rng();
      r2[i] = r1[i] ^ r[i];
    }
    auto [b1, b2] = run_two_party([&](Party& p) { return less_than_public(p, c, p.id() == 1 ? r1 : r2, m); });
    auto bits = reconstruct_bits(b1, b2);
    for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(bits[i], (c[i] & ring_mask(m)) < (r[i] & ring_mask(m))) << m;
  }
}

TEST(Party, TripleReuseIsRefused) {
  auto [c1, c2] = make_channel_pair();
  auto dealer = std::make_shared<const Dealer>(1);
  LocalDealerSource src(dealer, 1);
  Party p(1, *c1, src);
  auto t = p.take(MaterialRequest::elem_triples(2));
  EXPECT_THROW(p.consume(t), TripleReuse);
  SharedVector x{1, {1, 2}, 0}, y{1, {3, 4}, 0};
  EXPECT_THROW(beaver_mul(p, x, y, t), TripleReuse);
  // Material fetched but never used is accepted exactly once.
  auto fresh = src.fetch(MaterialRequest::elem_triples(2));
  EXPECT_NO_THROW(p.consume(fresh));
  EXPECT_THROW(p.consume(fresh), TripleReuse);
}

}  // namespace
}  // namespace propattest::mpc

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "propattest/mpc/channel.hpp"
#include "propattest/mpc/dealer.hpp"
#include "propattest/mpc/share.hpp"

namespace propattest::mpc {

class TripleReuse : public Error {
 public:
  using Error::Error;
};

// XOR-shared bits held by one party.
struct BitShares {
  int party = 1;
  std::vector<std::uint8_t> bits;

  std::size_t size() const { return bits.size(); }
};

std::vector<std::uint8_t> reconstruct_bits(const BitShares& s1, const BitShares& s2);

// One computing party: its peer link, its dealer feed, and the set of
// consumed material ids.
class Party {
 public:
  Party(int id, Channel& peer, MaterialSource& dealer);

  int id() const { return id_; }
  Channel& peer() { return peer_; }
  MaterialSource& dealer() { return dealer_; }

  // Fresh material from the dealer, already marked as consumed.
  Material take(const MaterialRequest& req);
  // Throws TripleReuse if `m` was used before; otherwise marks it.
  void consume(const Material& m);

  // Sends this party's masked values and returns the opened sum.
  std::vector<Ring> open(std::string_view tag, std::span<const Ring> mine);
  std::vector<std::uint8_t> open_bits(std::string_view tag, std::span<const std::uint8_t> mine);

  std::uint64_t rounds() const { return rounds_; }

 private:
  Bytes exchange(std::string_view tag, Bytes mine);

  int id_;
  Channel& peer_;
  MaterialSource& dealer_;
  std::unordered_set<std::uint64_t> used_;
  std::uint64_t rounds_ = 0;
};

// Shares of a public vector: party 1 holds it, party 2 holds zeros.
SharedVector public_shares(int party, std::span<const Ring> values, int frac_bits);

// Elementwise product; truncated back to frac_bits when frac_bits > 0.
SharedVector beaver_mul(Party& p, const SharedVector& x, const SharedVector& y, const Material& triple);
SharedVector mul(Party& p, const SharedVector& x, const SharedVector& y);

// Row-major (rows x inner) times (inner x cols), then truncation.
SharedVector beaver_matmul(Party& p, const SharedVector& x, const SharedVector& y, std::size_t rows,
                           std::size_t inner, std::size_t cols, const Material& triple);
SharedVector matmul(Party& p, const SharedVector& x, const SharedVector& y, std::size_t rows, std::size_t inner,
                    std::size_t cols);

// Exact floor(z / 2^f) on the signed value; requires |z| < 2^62.
SharedVector truncate(Party& p, const SharedVector& z, int f);

BitShares and_bits(Party& p, const BitShares& x, const BitShares& y);

// Per element: [c mod 2^m < r mod 2^m] for public c and XOR-shared r words.
BitShares less_than_public(Party& p, std::span<const Ring> c, std::span<const Ring> r_bits, int m);

// XOR-shared bits to additive shares (frac_bits 0).
SharedVector bits_to_arith(Party& p, const BitShares& b);

// x >= y per element as XOR-shared bits; requires |x - y| < 2^63.
BitShares secure_compare(Party& p, const SharedVector& x, const SharedVector& y);

}  // namespace propattest::mpc

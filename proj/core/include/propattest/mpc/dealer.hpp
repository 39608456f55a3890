#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "propattest/common/binary_io.hpp"
#include "propattest/mpc/channel.hpp"
#include "propattest/mpc/ring.hpp"

namespace propattest::mpc {

enum class MaterialKind : std::uint8_t {
  kElemTriple = 1,  // a, b, c = a*b elementwise
  kMatTriple = 2,   // A (rows x inner), B (inner x cols), C = A B
  kBitTriple = 3,   // XOR-shared u, v, w = u AND v
  kDaBit = 4,       // one random bit, XOR-shared and additively shared
  kEdaMask = 5,     // random r: additive shares, XOR-shared bits, shares of r >> f
};

struct MaterialRequest {
  MaterialKind kind = MaterialKind::kElemTriple;
  std::uint32_t count = 0;  // elements (or bits); matrix triples use the dims
  std::uint32_t rows = 0;
  std::uint32_t inner = 0;
  std::uint32_t cols = 0;
  std::uint32_t frac_bits = 0;  // mask kind only

  static MaterialRequest elem_triples(std::uint32_t n) { return {MaterialKind::kElemTriple, n}; }
  static MaterialRequest mat_triple(std::uint32_t rows, std::uint32_t inner, std::uint32_t cols) {
    return {MaterialKind::kMatTriple, 0, rows, inner, cols};
  }
  static MaterialRequest bit_triples(std::uint32_t n) { return {MaterialKind::kBitTriple, n}; }
  static MaterialRequest dabits(std::uint32_t n) { return {MaterialKind::kDaBit, n}; }
  static MaterialRequest masks(std::uint32_t n, std::uint32_t frac_bits) {
    return {MaterialKind::kEdaMask, n, 0, 0, 0, frac_bits};
  }

  friend bool operator==(const MaterialRequest&, const MaterialRequest&) = default;
};

// One party's share of a batch of correlated randomness. Field use by kind:
//   triples: a, b, c (ring)
//   bit triples: u, v, w (bits)
//   daBits: u (XOR share), a (additive share)
//   masks: a (r), b (XOR share of r's bits, one word per element), c (r >> f)
struct Material {
  std::uint64_t id = 0;  // dealer stream index
  int party = 1;
  MaterialRequest request;
  std::vector<Ring> a, b, c;
  std::vector<std::uint8_t> u, v, w;

  friend bool operator==(const Material&, const Material&) = default;
};

void write_material(ByteWriter& w, const Material& m);
Material read_material(ByteReader& r);

// Trusted dealer. Item `index` depends only on (seed, index, request), so
// both parties can fetch their halves independently.
class Dealer {
 public:
  explicit Dealer(std::uint64_t seed) : seed_(seed) {}
  std::uint64_t seed() const { return seed_; }
  std::pair<Material, Material> generate(const MaterialRequest& req, std::uint64_t index) const;

 private:
  std::uint64_t seed_;
};

struct DealerBatch {
  std::uint64_t seed = 0;
  std::vector<Material> party1;
  std::vector<Material> party2;
};

// `count` items of shape `req`, indices 0..count-1.
DealerBatch dealer_gen(std::size_t count, const MaterialRequest& req, std::uint64_t seed);

// DLR1 file holding one party's items.
Bytes serialize_materials(int party, std::uint64_t seed, std::span<const Material> items);
std::pair<std::uint64_t, std::vector<Material>> deserialize_materials(std::span<const std::uint8_t> bytes,
                                                                      int expected_party);

class MaterialSource {
 public:
  virtual ~MaterialSource() = default;
  Material fetch(const MaterialRequest& req);
  std::uint64_t consumed() const { return consumed_; }

 protected:
  virtual Material produce(const MaterialRequest& req, std::uint64_t index) = 0;

 private:
  std::uint64_t consumed_ = 0;
};

class LocalDealerSource final : public MaterialSource {
 public:
  LocalDealerSource(std::shared_ptr<const Dealer> dealer, int party) : dealer_(std::move(dealer)), party_(party) {}

 protected:
  Material produce(const MaterialRequest& req, std::uint64_t index) override;

 private:
  std::shared_ptr<const Dealer> dealer_;
  int party_;
};

// Fetches material from a dealer service over a channel (DREQ / DMAT).
class RemoteDealerSource final : public MaterialSource {
 public:
  RemoteDealerSource(Channel& ch, int party) : ch_(ch), party_(party) {}
  // Tells the service this party is done.
  void finish();

 protected:
  Material produce(const MaterialRequest& req, std::uint64_t index) override;

 private:
  Channel& ch_;
  int party_;
};

// Answers DREQ messages for one party until DEND or channel closure.
// Returns the number of items served.
std::uint64_t serve_dealer(const Dealer& dealer, Channel& ch, int party);

}  // namespace propattest::mpc

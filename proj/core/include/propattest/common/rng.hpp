#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace propattest {

// Statistical generator for data synthesis and training.
using Prng = std::mt19937_64;

// Derives an independent child seed; used to give every replicate, model and
// protocol party its own stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);
std::uint64_t derive_seed(std::uint64_t base, std::string_view label, std::uint64_t index = 0);

// Seeded ChaCha20 keystream (libsodium). Masks for secret shares and dealer
// material are drawn from this, never from Prng.
class ChaChaRng {
 public:
  using result_type = std::uint64_t;

  explicit ChaChaRng(std::uint64_t seed, std::string_view domain = "propattest");

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

  std::uint8_t bit() { return static_cast<std::uint8_t>((*this)() & 1U); }

 private:
  void refill();

  static constexpr std::size_t kBlocks = 16;
  std::array<std::uint8_t, 32> key_{};
  std::array<std::uint8_t, 8> nonce_{};
  std::array<std::uint8_t, 64 * kBlocks> buf_{};
  std::uint64_t counter_ = 0;
  std::size_t pos_ = sizeof(buf_);
};

}  // namespace propattest

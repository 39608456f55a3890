#include "propattest/common/rng.hpp"

#include <sodium.h>

#include <cstring>
#include <stdexcept>

namespace propattest {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw std::runtime_error("libsodium initialization failed");
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return splitmix(splitmix(splitmix(base) ^ a) ^ (b * 0xD6E8FEB86659FD93ULL));
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view label, std::uint64_t index) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return derive_seed(base, h, index);
}

ChaChaRng::ChaChaRng(std::uint64_t seed, std::string_view domain) {
  ensure_sodium();
  std::array<std::uint8_t, 8> seed_bytes{};
  for (int i = 0; i < 8; ++i) seed_bytes[i] = static_cast<std::uint8_t>(seed >> (8 * i));
  crypto_generichash_state st;
  crypto_generichash_init(&st, nullptr, 0, key_.size());
  crypto_generichash_update(&st, reinterpret_cast<const unsigned char*>(domain.data()), domain.size());
  crypto_generichash_update(&st, seed_bytes.data(), seed_bytes.size());
  crypto_generichash_final(&st, key_.data(), key_.size());
}

void ChaChaRng::refill() {
  std::memset(buf_.data(), 0, buf_.size());
  crypto_stream_chacha20_xor_ic(buf_.data(), buf_.data(), buf_.size(), nonce_.data(), counter_, key_.data());
  counter_ += kBlocks;
  pos_ = 0;
}

ChaChaRng::result_type ChaChaRng::operator()() {
  if (pos_ + 8 > buf_.size()) refill();
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

}  // namespace propattest

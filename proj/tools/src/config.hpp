#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "propattest/common/error.hpp"
#include "propattest/common/rational.hpp"

namespace propattest::cli {

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Flat key=value configuration with a fixed schema. Lines starting with '#'
// and blank lines are ignored.
class Config {
 public:
  Config();

  void load_file(const std::filesystem::path& path);
  void load_text(const std::string& text, const std::string& origin = "<text>");
  void set(const std::string& key, const std::string& value);
  // ATTEST_SEED replaces the master seed and voids explicit sub-seeds.
  void apply_env();

  bool has(const std::string& key) const;
  std::string str(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  std::uint64_t seed(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;
  Rational rational(const std::string& key) const;
  std::vector<std::size_t> counts(const std::string& key) const;
  std::vector<Rational> grid() const;

  // Every key with its effective value, sorted, one "key=value" per line.
  std::string resolved() const;
  std::string hash() const;

  static std::vector<std::string> known_keys();

 private:
  std::map<std::string, std::string> values_;
  bool env_seed_ = false;
};

}  // namespace propattest::cli

#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "propattest/common/checksum.hpp"
#include "propattest/common/rng.hpp"

namespace propattest::cli {

namespace {

struct KeySpec {
  const char* name;
  const char* fallback;  // nullptr: required when read
};

// Sub-seeds default to values derived from `seed`.
constexpr const char* kDerived = "<derived>";

constexpr KeySpec kSchema[] = {
    {"out_dir", nullptr},
    {"seed", "1"},
    {"workers", "1"},
    // data
    {"ratio", nullptr},
    {"n", "500"},
    {"d", "4"},
    {"mean_shift", "1.0"},
    {"label_noise", "0.1"},
    {"grid", "0.2,0.8"},
    {"p_req", "0.2"},
    {"window", "0"},
    // shadow and prover models
    {"per_value", "200"},
    {"hidden", "8,4"},
    {"model_epochs", "100"},
    {"model_lr", "0.01"},
    {"model_batch", "64"},
    {"holdout_fraction", "0.3"},
    // attestor
    {"att_epochs", "200"},
    {"att_lr", "0.005"},
    {"att_batch", "32"},
    {"phi_hidden", "16,16"},
    {"rho_hidden", "8"},
    {"calibration", "fixed_far"},
    {"level", "0.05"},
    // attack and defence
    {"epsilon", "0.03137254901960784"},
    {"pgd_steps", "20"},
    {"pgd_step_size", "0.00392156862745098"},
    {"adv_epsilon", "0.03137254901960784"},
    {"finetune_models", "3"},
    // protocol
    {"mode", nullptr},
    {"transport", "inproc"},
    {"role", "all"},
    {"server1_addr", "127.0.0.1:47101"},
    {"server2_addr", "127.0.0.1:47102"},
    {"dealer_addr", "127.0.0.1:47103"},
    {"session_id", "1"},
    {"frac_bits", "16"},
    {"secure_epochs", "10"},
    {"secure_lr", "0.05"},
    {"secure_batch", "16"},
    {"crypto_n", "60"},
    {"crypto_d", "4"},
    // hybrid
    {"n_spchk", "0"},
    {"omega_crpt_comp", "measured"},
    {"omega_crpt_comm", "measured"},
    {"omega_inf", "0"},
    // seeds
    {"data_seed", kDerived},
    {"shadow_seed", kDerived},
    {"prover_corpus_seed", kDerived},
    {"split_seed", kDerived},
    {"attestor_seed", kDerived},
    {"model_seed", kDerived},
    {"attack_seed", kDerived},
    {"dealer_seed", kDerived},
    {"prover_seed", kDerived},
    {"order_seed", kDerived},
    {"spot_seed", kDerived},
};

const KeySpec* find_key(const std::string& key) {
  for (const auto& k : kSchema)
    if (key == k.name) return &k;
  return nullptr;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError("key " + key + ": cannot parse '" + text + "'");
  }
  return v;
}

}  // namespace

Config::Config() = default;

std::vector<std::string> Config::known_keys() {
  std::vector<std::string> out;
  for (const auto& k : kSchema) out.emplace_back(k.name);
  return out;
}

void Config::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  load_text(ss.str(), path.string());
}

void Config::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    }
    set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

void Config::set(const std::string& key, const std::string& value) {
  if (!find_key(key)) throw ConfigError("unknown config key: " + key);
  values_[key] = value;
}

void Config::apply_env() {
  const char* env = std::getenv("ATTEST_SEED");
  if (!env) return;
  std::string v = trim(env);
  parse_number<std::uint64_t>("ATTEST_SEED", v);
  values_["seed"] = v;
  env_seed_ = true;
}

bool Config::has(const std::string& key) const {
  const KeySpec* spec = find_key(key);
  if (!spec) throw ConfigError("unknown config key: " + key);
  return values_.contains(key) || spec->fallback != nullptr;
}

std::string Config::str(const std::string& key) const {
  const KeySpec* spec = find_key(key);
  if (!spec) throw ConfigError("unknown config key: " + key);
  auto it = values_.find(key);
  if (it != values_.end()) return it->second;
  if (!spec->fallback) throw ConfigError("missing required key: " + key);
  return spec->fallback;
}

std::int64_t Config::integer(const std::string& key) const { return parse_number<std::int64_t>(key, str(key)); }

std::size_t Config::count(const std::string& key) const {
  auto v = integer(key);
  if (v < 0) throw ConfigError("key " + key + " must be non-negative");
  return static_cast<std::size_t>(v);
}

std::uint64_t Config::seed(const std::string& key) const {
  const std::uint64_t master = parse_number<std::uint64_t>("seed", str("seed"));
  if (key == "seed") return master;
  std::string v = str(key);
  if (v == kDerived || env_seed_) return derive_seed(master, key);
  return parse_number<std::uint64_t>(key, v);
}

double Config::real(const std::string& key) const {
  std::string s = str(key);
  double v = 0.0;
  try {
    std::size_t used = 0;
    v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
  } catch (const std::exception&) {
    throw ConfigError("key " + key + ": cannot parse '" + s + "' as a number");
  }
  if (!std::isfinite(v)) throw ConfigError("key " + key + " must be finite");
  return v;
}

bool Config::flag(const std::string& key) const {
  std::string v = str(key);
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw ConfigError("key " + key + ": expected a boolean");
}

Rational Config::rational(const std::string& key) const {
  try {
    return Rational::parse(str(key));
  } catch (const InvalidArgument& e) {
    throw ConfigError("key " + key + ": " + e.what());
  }
}

std::vector<std::size_t> Config::counts(const std::string& key) const {
  std::vector<std::size_t> out;
  std::string s = str(key);
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto v = parse_number<std::int64_t>(key, trim(item));
    if (v <= 0) throw ConfigError("key " + key + " entries must be positive");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::vector<Rational> Config::grid() const {
  std::vector<Rational> out;
  std::stringstream ss(str("grid"));
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(Rational::parse(trim(item)));
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("key grid: ") + e.what());
    }
  }
  if (out.empty()) throw ConfigError("key grid must list at least one value");
  return out;
}

std::string Config::resolved() const {
  std::vector<std::string> keys = known_keys();
  std::sort(keys.begin(), keys.end());
  std::ostringstream os;
  for (const auto& k : keys) {
    const KeySpec* spec = find_key(k);
    auto it = values_.find(k);
    std::string v;
    if (k == "seed" || std::string_view(spec->fallback ? spec->fallback : "") == kDerived) {
      v = std::to_string(seed(k));
    } else if (it != values_.end()) {
      v = it->second;
    } else if (spec->fallback) {
      v = spec->fallback;
    } else {
      continue;
    }
    os << k << '=' << v << '\n';
  }
  return os.str();
}

std::string Config::hash() const {
  // Where results land does not change them.
  std::string text = resolved();
  auto at = text.find("out_dir=");
  if (at != std::string::npos) text.erase(at, text.find('\n', at) - at + 1);
  return sha256_hex(text);
}

}  // namespace propattest::cli

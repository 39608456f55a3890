#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "propattest/attest/classifier.hpp"

namespace propattest::hybrid {

// P(T = t) for T ~ Hypergeometric(population N_a, successes z, draws
// N_spchk), from exact big-integer binomials.
double hypergeom_pmf(std::uint64_t z, std::uint64_t n_a, std::uint64_t n_spchk, std::uint64_t t);

struct EffectiveFa {
  std::uint64_t t_star = 0;
  std::uint64_t fa_new = 0;
};

// t_star = argmax over t in [0, z] of the pmf, ties to the larger t.
EffectiveFa effective_fa(std::uint64_t z, std::uint64_t n_a, std::uint64_t n_spchk);

enum class CostSource { kMeasured, kConfigured };

struct CostModel {
  double omega_inf_seconds = 0.0;
  double omega_inf_bytes = 0.0;
  double omega_crpt_comp = 0.0;   // seconds per cryptographic attestation
  double omega_crpt_comm = 0.0;   // bytes per cryptographic attestation
  CostSource source = CostSource::kConfigured;
  std::string transcript;  // phase CSV the measurement came from, when measured

  void validate() const;
};

struct SpotCheckPlan {
  std::uint64_t n_accepted = 0;   // N_a
  std::uint64_t fa_estimate = 0;  // z
  std::uint64_t n_spot = 0;       // N_spchk
  std::uint64_t seed = 0;

  // z <= N_a and N_spchk <= N_a.
  void validate() const;
  // N_spchk < z: some false accepts are certain to survive.
  bool below_fa_estimate() const { return n_spot < fa_estimate; }
};

struct AttestationCase {
  std::string id;
  model::FirstLayerFeature feature;
  bool in_window = false;  // ground truth
};

struct CryptoResult {
  bool verdict = false;
  bool failed = false;
  std::string failure;
  double seconds = 0.0;
  double bytes = 0.0;
};

// Runs cryptographic attestation for case i at most once; later requests hit
// the cache.
class CryptoOracle {
 public:
  using Runner = std::function<CryptoResult(std::size_t index)>;
  explicit CryptoOracle(Runner runner) : runner_(std::move(runner)) {}
  const CryptoResult& attest(std::size_t index);
  std::size_t sessions_run() const { return cache_.size(); }

 private:
  Runner runner_;
  std::map<std::size_t, CryptoResult> cache_;
};

struct CaseOutcome {
  std::string id;
  bool in_window = false;
  bool inference_accept = false;
  bool crypto_checked = false;
  bool crypto_failed = false;
  bool final_accept = false;
};

struct FlowRates {
  double far = 0.0;  // accepted out-of-window cases / out-of-window cases
  double frr = 0.0;  // rejected in-window cases / in-window cases
};

FlowRates flow_rates(const std::vector<CaseOutcome>& cases, bool final_decision);

struct FixedFarReport {
  std::vector<CaseOutcome> cases;
  std::size_t n = 0;
  std::size_t n_rejected = 0;
  FlowRates inference;
  FlowRates final;
  double p_crpt = 0.0;
  double expected_comp_seconds = 0.0;
  double expected_comm_bytes = 0.0;
  // Per-prover averages over the sessions that actually ran.
  double measured_comp_seconds = 0.0;
  double measured_comm_bytes = 0.0;
  std::vector<std::string> warnings;
};

// Accepted cases are final; rejected ones are re-run cryptographically.
FixedFarReport run_fixed_far(const std::vector<AttestationCase>& cases, const attest::AttClassifier& clf,
                             CryptoOracle& crypto, const CostModel& cost);

struct CurvePoint {
  std::uint64_t n_spchk = 0;
  double predicted_far = 0.0;
  double measured_far = 0.0;
  double expected_comp_seconds = 0.0;
  double expected_comm_bytes = 0.0;
};

struct FixedFrrReport {
  std::vector<CaseOutcome> cases;
  std::size_t n = 0;
  std::size_t n_accepted = 0;
  std::size_t n_negative = 0;
  FlowRates inference;
  FlowRates final;
  EffectiveFa predicted;
  double predicted_far = 0.0;
  double p_spchk = 0.0;
  double expected_comp_seconds = 0.0;
  double expected_comm_bytes = 0.0;
  std::vector<CurvePoint> curve;
  std::vector<std::string> warnings;
};

// Rejections are final; plan.n_spot accepted cases are drawn without
// replacement and re-checked. The curve sweeps N_spchk over 0..N_a.
FixedFrrReport run_fixed_frr(const std::vector<AttestationCase>& cases, const attest::AttClassifier& clf,
                             CryptoOracle& crypto, const SpotCheckPlan& plan, const CostModel& cost);

// Indices of accepted cases picked for spot checks.
std::vector<std::size_t> draw_spot_checks(const std::vector<std::size_t>& accepted, std::uint64_t n_spot,
                                          std::uint64_t seed);

// n_spchk,predicted_far,measured_far,expected_comp_seconds,expected_comm_bytes
std::string curve_csv(const std::vector<CurvePoint>& curve);

}  // namespace propattest::hybrid

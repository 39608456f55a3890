#include "propattest/hybrid/hybrid.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "propattest/common/error.hpp"
#include "propattest/common/rng.hpp"

namespace propattest::hybrid {

namespace {

mpz_class binomial(std::uint64_t n, std::uint64_t k) {
  mpz_class out;
  if (k > n) return 0;
  mpz_bin_uiui(out.get_mpz_t(), n, k);
  return out;
}

double ratio(std::size_t num, std::size_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / den; }

}  // namespace

double hypergeom_pmf(std::uint64_t z, std::uint64_t n_a, std::uint64_t n_spchk, std::uint64_t t) {
  if (z > n_a) throw InvalidArgument("false accepts cannot exceed accepted count");
  if (n_spchk > n_a) throw InvalidArgument("spot checks cannot exceed accepted count");
  if (t > z) throw InvalidArgument("t cannot exceed z");
  if (t > n_spchk || n_spchk - t > n_a - z) return 0.0;
  mpq_class p(binomial(z, t) * binomial(n_a - z, n_spchk - t), binomial(n_a, n_spchk));
  p.canonicalize();
  return p.get_d();
}

EffectiveFa effective_fa(std::uint64_t z, std::uint64_t n_a, std::uint64_t n_spchk) {
  if (z > n_a) throw InvalidArgument("false accepts cannot exceed accepted count");
  if (n_spchk > n_a) throw InvalidArgument("spot checks cannot exceed accepted count");
  // Exact comparison: every pmf shares the denominator C(N_a, N_spchk).
  mpz_class best = -1;
  std::uint64_t t_star = 0;
  for (std::uint64_t t = 0; t <= z; ++t) {
    if (t > n_spchk || n_spchk - t > n_a - z) continue;
    mpz_class num = binomial(z, t) * binomial(n_a - z, n_spchk - t);
    if (num >= best) {
      best = num;
      t_star = t;
    }
  }
  return {t_star, z - t_star};
}

void CostModel::validate() const {
  for (double v : {omega_inf_seconds, omega_inf_bytes, omega_crpt_comp, omega_crpt_comm}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("cost model entries must be finite and non-negative");
  }
}

void SpotCheckPlan::validate() const {
  if (fa_estimate > n_accepted || n_spot > n_accepted) {
    throw InvalidArgument("spot-check plan needs z <= N_a and N_spchk <= N_a");
  }
}

const CryptoResult& CryptoOracle::attest(std::size_t index) {
  auto it = cache_.find(index);
  if (it == cache_.end()) it = cache_.emplace(index, runner_(index)).first;
  return it->second;
}

FlowRates flow_rates(const std::vector<CaseOutcome>& cases, bool final_decision) {
  std::size_t neg = 0, pos = 0, fa = 0, fr = 0;
  for (const auto& c : cases) {
    bool accept = final_decision ? c.final_accept : c.inference_accept;
    if (c.in_window) {
      ++pos;
      if (!accept) ++fr;
    } else {
      ++neg;
      if (accept) ++fa;
    }
  }
  return {ratio(fa, neg), ratio(fr, pos)};
}

namespace {

std::vector<CaseOutcome> infer_all(const std::vector<AttestationCase>& cases, const attest::AttClassifier& clf) {
  if (cases.empty()) throw InvalidArgument("no attestation cases");
  std::vector<CaseOutcome> out;
  out.reserve(cases.size());
  for (const auto& c : cases) {
    bool acc = clf.accepts(c.feature);
    out.push_back({c.id, c.in_window, acc, false, false, acc});
  }
  return out;
}

}  // namespace

FixedFarReport run_fixed_far(const std::vector<AttestationCase>& cases, const attest::AttClassifier& clf,
                             CryptoOracle& crypto, const CostModel& cost) {
  cost.validate();
  FixedFarReport rep;
  rep.cases = infer_all(cases, clf);
  rep.n = cases.size();
  rep.inference = flow_rates(rep.cases, false);

  double secs = 0.0, bytes = 0.0;
  for (std::size_t i = 0; i < rep.cases.size(); ++i) {
    auto& c = rep.cases[i];
    if (c.inference_accept) continue;
    ++rep.n_rejected;
    const CryptoResult& r = crypto.attest(i);
    c.crypto_checked = true;
    if (r.failed) {
      c.crypto_failed = true;
      c.final_accept = false;
      rep.warnings.push_back("case " + c.id + ": cryptographic session failed (" + r.failure +
                             "); excluded from cost");
      continue;
    }
    c.final_accept = r.verdict;
    secs += r.seconds;
    bytes += r.bytes;
  }
  rep.final = flow_rates(rep.cases, true);
  rep.p_crpt = ratio(rep.n_rejected, rep.n);
  rep.expected_comp_seconds = rep.p_crpt * cost.omega_crpt_comp;
  rep.expected_comm_bytes = rep.p_crpt * cost.omega_crpt_comm;
  rep.measured_comp_seconds = secs / static_cast<double>(rep.n);
  rep.measured_comm_bytes = bytes / static_cast<double>(rep.n);
  return rep;
}

std::vector<std::size_t> draw_spot_checks(const std::vector<std::size_t>& accepted, std::uint64_t n_spot,
                                          std::uint64_t seed) {
  if (n_spot > accepted.size()) throw InvalidArgument("more spot checks than accepted cases");
  std::vector<std::size_t> pool = accepted;
  Prng rng(derive_seed(seed, "spot-check"));
  // Partial Fisher-Yates: the first n_spot entries are a uniform sample.
  for (std::size_t i = 0; i < n_spot; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(n_spot);
  std::sort(pool.begin(), pool.end());
  return pool;
}

FixedFrrReport run_fixed_frr(const std::vector<AttestationCase>& cases, const attest::AttClassifier& clf,
                             CryptoOracle& crypto, const SpotCheckPlan& plan, const CostModel& cost) {
  cost.validate();
  plan.validate();
  FixedFrrReport rep;
  rep.cases = infer_all(cases, clf);
  rep.n = cases.size();
  rep.inference = flow_rates(rep.cases, false);

  std::vector<std::size_t> accepted;
  for (std::size_t i = 0; i < rep.cases.size(); ++i) {
    if (rep.cases[i].inference_accept) accepted.push_back(i);
    if (!rep.cases[i].in_window) ++rep.n_negative;
  }
  rep.n_accepted = accepted.size();
  if (plan.n_accepted != accepted.size()) {
    throw InvalidArgument("plan N_a " + std::to_string(plan.n_accepted) + " differs from " +
                          std::to_string(accepted.size()) + " accepted cases");
  }

  // Applies one spot-check sample to a copy of the inference outcomes.
  auto apply = [&](std::vector<CaseOutcome> outcomes, std::uint64_t n_spot, std::uint64_t seed,
                   std::vector<std::string>* warnings) {
    for (std::size_t i : draw_spot_checks(accepted, n_spot, seed)) {
      const CryptoResult& r = crypto.attest(i);
      auto& c = outcomes[i];
      c.crypto_checked = true;
      if (r.failed) {
        c.crypto_failed = true;
        if (warnings) warnings->push_back("case " + c.id + ": cryptographic session failed (" + r.failure + ")");
        continue;
      }
      if (!r.verdict) c.final_accept = false;
    }
    return outcomes;
  };

  if (plan.below_fa_estimate()) {
    rep.warnings.push_back("N_spchk " + std::to_string(plan.n_spot) + " is below the false-accept estimate " +
                           std::to_string(plan.fa_estimate));
  }
  rep.cases = apply(rep.cases, plan.n_spot, plan.seed, &rep.warnings);
  rep.final = flow_rates(rep.cases, true);
  rep.predicted = effective_fa(plan.fa_estimate, plan.n_accepted, plan.n_spot);
  rep.predicted_far = ratio(rep.predicted.fa_new, rep.n_negative);
  rep.p_spchk = ratio(plan.n_spot, rep.n);
  rep.expected_comp_seconds = rep.p_spchk * cost.omega_crpt_comp;
  rep.expected_comm_bytes = rep.p_spchk * cost.omega_crpt_comm;

  const auto base = infer_all(cases, clf);
  for (std::uint64_t s = 0; s <= plan.n_accepted; ++s) {
    CurvePoint pt;
    pt.n_spchk = s;
    pt.predicted_far = ratio(effective_fa(plan.fa_estimate, plan.n_accepted, s).fa_new, rep.n_negative);
    pt.measured_far = flow_rates(apply(base, s, derive_seed(plan.seed, "curve", s), nullptr), true).far;
    double p = ratio(s, rep.n);
    pt.expected_comp_seconds = p * cost.omega_crpt_comp;
    pt.expected_comm_bytes = p * cost.omega_crpt_comm;
    rep.curve.push_back(pt);
  }
  return rep;
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::ostringstream os;
  os.precision(10);
  os << "n_spchk,predicted_far,measured_far,expected_comp_seconds,expected_comm_bytes\n";
  for (const auto& p : curve) {
    os << p.n_spchk << ',' << p.predicted_far << ',' << p.measured_far << ',' << p.expected_comp_seconds << ','
       << p.expected_comm_bytes << '\n';
  }
  return os.str();
}

}  // namespace propattest::hybrid

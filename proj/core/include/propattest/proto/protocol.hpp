#pragma once

#include <chrono>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "propattest/data/dataset.hpp"
#include "propattest/model/mlp.hpp"
#include "propattest/mpc/party.hpp"
#include "propattest/proto/transcript.hpp"

namespace propattest::proto {

using mpc::BitShares;
using mpc::Party;
using mpc::Ring;
using mpc::SharedVector;

// Plain mini-batch gradient descent on square loss for a [d, 1] linear model.
struct SecureTrainParams {
  std::size_t epochs = 10;
  double learning_rate = 0.05;
  std::size_t batch_size = 16;
  std::uint64_t order_seed = 0;
};

// Public agreement among servers and verifier.
struct SessionConfig {
  std::uint64_t session_id = 0;
  data::PropertySpec spec{Rational(1, 2), 0, data::PropertySpec::default_grid()};
  SecureTrainParams train;
  int frac_bits = mpc::kDefaultFracBits;
};

// Record indices of every minibatch for one epoch, in processing order.
std::vector<std::vector<std::size_t>> batch_order(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                  std::size_t epoch);

// Shared linear model; w holds d entries, b one.
struct LinearShares {
  SharedVector w;
  SharedVector b;
};

// Data shares one server holds after input sharing. Features and labels use
// the session's fixed-point encoding; the sensitive column is integer 0/1.
struct InputShares {
  std::size_t n = 0;
  std::size_t d = 0;
  SharedVector features;  // n x d row-major
  SharedVector labels;
  SharedVector sensitive;
  LinearShares model;
};

// lo*n <= count <= hi*n, tested with two comparisons on public cross
// products and one AND.
BitShares distcheck(Party& p, const SharedVector& sensitive, std::size_t n, const data::PropertySpec& spec);

LinearShares secure_train(Party& p, const InputShares& in, const SecureTrainParams& hp);

// Wire payloads.
Bytes encode_inputs(std::uint64_t session_id, const InputShares& in);
Bytes encode_weights(std::uint64_t session_id, const LinearShares& m, std::size_t d);
Bytes encode_verdict(std::uint64_t session_id, std::uint8_t share);
Bytes encode_model(std::uint64_t session_id, const LinearShares& m);

// Ordering rules for one server's prover link: exactly one INPD, then
// exactly one INPW, with shapes consistent with the session.
class ServerInputState {
 public:
  ServerInputState(int party, std::uint64_t session_id, int frac_bits)
      : party_(party), session_id_(session_id), frac_bits_(frac_bits) {}
  void on_message(const Message& m);
  bool complete() const { return stage_ == 2; }
  InputShares take();

 private:
  int party_;
  std::uint64_t session_id_;
  int frac_bits_;
  int stage_ = 0;
  InputShares in_;
};

// Ordering rules for the verifier's link to one server: OUTV then OUTM.
class VerifierOutputState {
 public:
  VerifierOutputState(int party, std::uint64_t session_id, int frac_bits)
      : party_(party), session_id_(session_id), frac_bits_(frac_bits) {}
  void on_message(const Message& m);
  bool complete() const { return stage_ == 2; }
  std::uint8_t verdict_share() const { return verdict_; }
  const LinearShares& model() const { return model_; }

 private:
  int party_;
  std::uint64_t session_id_;
  int frac_bits_;
  int stage_ = 0;
  std::uint8_t verdict_ = 0;
  LinearShares model_;
};

class SessionFailure : public Error {
 public:
  SessionFailure(std::string phase, const std::string& reason)
      : Error(phase + ": " + reason), phase_(std::move(phase)) {}
  const std::string& phase() const { return phase_; }

 private:
  std::string phase_;
};

// Hook for a malicious prover. Only roles that hold an output share ever call
// it.
class ProverAdversary {
 public:
  virtual ~ProverAdversary() = default;
  virtual void tamper_output(BitShares& share) = 0;
};

class FlipOutputShare final : public ProverAdversary {
 public:
  void tamper_output(BitShares& share) override {
    for (auto& b : share.bits) b ^= 1U;
  }
};

// A role that can tamper with the verdict must expose its output share.
template <typename Role>
concept HoldsOutputShare = requires(Role& r) {
  { r.output_share() } -> std::same_as<BitShares&>;
};

// Outsourced prover: sends input shares to both servers and leaves.
class OutsourcedProver {
 public:
  OutsourcedProver(std::uint64_t session_id, int frac_bits, std::uint64_t seed)
      : session_id_(session_id), frac_bits_(frac_bits), seed_(seed) {}
  void share_inputs(const data::LabeledDataset& ds, const model::MlpModel& init, Channel& to_s1, Channel& to_s2,
                    ProverAdversary* adversary = nullptr);

 private:
  std::uint64_t session_id_;
  int frac_bits_;
  std::uint64_t seed_;
};

void prover_share_inputs(const data::LabeledDataset& ds, const model::MlpModel& init, Channel& to_s1,
                         Channel& to_s2, std::uint64_t session_id, int frac_bits, std::uint64_t seed);

struct ServerOutput {
  std::uint8_t verdict_share = 0;
  LinearShares model;
};

// One computing server. Any protocol violation or peer abort sends ABRT on
// every link and raises SessionFailure.
class ServerSession {
 public:
  // Records into `transcript` when given, otherwise into an owned one.
  ServerSession(int party, SessionConfig cfg, Channel& prover, Channel& peer, Channel& verifier,
                mpc::MaterialSource& dealer, SessionTranscript* transcript = nullptr);

  ServerOutput run();

  SessionTranscript& transcript() { return *transcript_; }
  const SessionTranscript& transcript() const { return *transcript_; }
  // Shares received from the prover; test inspection only.
  const std::optional<InputShares>& held_inputs() const { return inputs_; }

 private:
  ServerOutput run_phases();

  int party_;
  SessionConfig cfg_;
  Channel& prover_;
  Channel& peer_;
  Channel& verifier_;
  mpc::MaterialSource& dealer_;
  SessionTranscript own_transcript_;
  SessionTranscript* transcript_;
  std::optional<InputShares> inputs_;
  std::string phase_ = "setup";
};

struct AttestationOutcome {
  bool verdict = false;
  bool aborted = false;
  std::string abort_reason;
  model::MlpModel model;
  std::vector<Ring> model_raw;  // w then b, fixed point
  double comp_seconds = 0.0;
  std::uint64_t comm_bytes = 0;
  std::vector<PhaseStats> phases;
};

// Waits for both servers' output shares. Fails closed: an abort or timeout
// yields verdict false with aborted set.
AttestationOutcome verifier_finish(Channel& s1, Channel& s2, const SessionConfig& cfg,
                                   std::chrono::milliseconds timeout = std::chrono::seconds(60),
                                   SessionTranscript* transcript = nullptr);

struct SessionSeeds {
  std::uint64_t prover = 1;
  std::uint64_t dealer = 2;
};

struct OutsourcedRun {
  AttestationOutcome outcome;
  SessionTranscript server1;
  SessionTranscript server2;
  SessionTranscript verifier;
  std::optional<InputShares> s1_inputs;
  std::optional<InputShares> s2_inputs;
};

// All four roles in one process over in-process channels.
std::unique_ptr<OutsourcedRun> run_outsourced(const data::LabeledDataset& ds, const model::MlpModel& init,
                                              const SessionConfig& cfg, const SessionSeeds& seeds,
                                              ProverAdversary* adversary = nullptr);

struct FidelityResult {
  bool ok = false;
  bool degenerate = false;
  double max_abs_diff = 0.0;
  std::string reason;
};

// Compares raw outputs on k seeded standard-normal probes with tolerance
// 2^-(f-2).
FidelityResult fidelity_check(const model::MlpModel& m_p, const model::MlpModel& m_2pc, std::size_t k,
                              std::uint64_t seed, int frac_bits = mpc::kDefaultFracBits);

// Direct mode: the prover is party 1 and the verifier party 2.
class DirectProver {
 public:
  explicit DirectProver(Party& self) : self_(self) {}
  void run_distcheck(const SharedVector& sensitive, std::size_t n, const data::PropertySpec& spec);
  BitShares& output_share() { return out_; }

 private:
  Party& self_;
  BitShares out_;
};

static_assert(HoldsOutputShare<DirectProver>);
static_assert(!HoldsOutputShare<OutsourcedProver>);

struct FlipBitRecord {
  bool truth = false;            // plaintext window check
  bool honest_verdict = false;   // direct mode, no tampering
  bool tampered_verdict = false; // direct mode, prover flipped its share
  bool outsourced_verdict = false;  // outsourced mode with the same adversary
};

FlipBitRecord flipbit_demo(const data::LabeledDataset& ds, const data::PropertySpec& spec, std::uint64_t seed);

}  // namespace propattest::proto

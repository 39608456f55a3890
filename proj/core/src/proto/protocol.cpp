#include "propattest/proto/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "propattest/common/rng.hpp"

namespace propattest::proto {

namespace {

using mpc::FixedPoint;
using mpc::MaterialSource;
using mpc::ProtocolError;

SharedVector make_shares(int party, std::vector<Ring> v, int frac_bits) {
  return SharedVector{party, std::move(v), frac_bits, mpc::kRingBits};
}

SharedVector select_rows(const SharedVector& m, std::span<const std::size_t> rows, std::size_t cols) {
  std::vector<Ring> out;
  out.reserve(rows.size() * cols);
  for (std::size_t r : rows)
    out.insert(out.end(), m.shares.begin() + static_cast<std::ptrdiff_t>(r * cols),
               m.shares.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols));
  return make_shares(m.party, std::move(out), m.frac_bits);
}

SharedVector transpose(const SharedVector& m, std::size_t rows, std::size_t cols) {
  std::vector<Ring> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = m.shares[i * cols + j];
  return make_shares(m.party, std::move(out), m.frac_bits);
}

void write_header(ByteWriter& w, std::uint64_t session_id) { w.u64(session_id); }

void check_session(ByteReader& r, std::uint64_t session_id) {
  if (r.u64() != session_id) throw ProtocolError("message belongs to another session");
}

// Reader errors on untrusted payloads become protocol violations.
template <typename F>
auto parse_payload(const Bytes& payload, F&& f) {
  try {
    ByteReader r(payload);
    auto out = f(r);
    r.expect_done();
    return out;
  } catch (const IoError& e) {
    throw ProtocolError(std::string("malformed payload: ") + e.what());
  }
}

constexpr std::uint64_t kMaxRecords = std::uint64_t{1} << 20;
constexpr std::uint64_t kMaxDim = 4096;

void check_linear(const model::MlpModel& m, std::size_t d) {
  const auto& dims = m.layer_dims();
  if (dims.size() != 2 || dims[0] != d || dims[1] != 1) throw ShapeMismatch("secure training needs a [d, 1] model");
}

}  // namespace

std::vector<std::vector<std::size_t>> batch_order(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                  std::size_t epoch) {
  if (batch_size == 0) throw InvalidArgument("batch size must be positive");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Prng rng(derive_seed(seed, "batch-order", epoch));
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n; s += batch_size)
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(s),
                     perm.begin() + static_cast<std::ptrdiff_t>(std::min(n, s + batch_size)));
  return out;
}

BitShares distcheck(Party& p, const SharedVector& sensitive, std::size_t n, const data::PropertySpec& spec) {
  if (sensitive.size() != n || n == 0) throw ShapeMismatch("sensitive column does not match n");
  if (sensitive.frac_bits != 0) throw InvalidArgument("sensitive column must be integer encoded");
  auto [lo, hi] = data::window_range(spec);
  using I = __int128;
  const I limit = I{1} << 62;
  for (I v : {I{lo.den()} * static_cast<I>(n), I{hi.den()} * static_cast<I>(n), I{lo.num()} * static_cast<I>(n),
              I{hi.num()} * static_cast<I>(n)}) {
    if (v >= limit) throw InvalidArgument("window cross products exceed the comparison range");
  }

  Ring count = 0;
  for (Ring s : sensitive.shares) count += s;
  // ge[0]: count*lo.den >= lo.num*n    ge[1]: hi.num*n >= count*hi.den
  const Ring lo_rhs = static_cast<Ring>(lo.num()) * n;
  const Ring hi_lhs = static_cast<Ring>(hi.num()) * n;
  const bool p1 = p.id() == 1;
  SharedVector x = make_shares(p.id(), {count * static_cast<Ring>(lo.den()), p1 ? hi_lhs : 0}, 0);
  SharedVector y = make_shares(p.id(), {p1 ? lo_rhs : 0, count * static_cast<Ring>(hi.den())}, 0);
  BitShares ge = mpc::secure_compare(p, x, y);
  return mpc::and_bits(p, BitShares{p.id(), {ge.bits[0]}}, BitShares{p.id(), {ge.bits[1]}});
}

LinearShares secure_train(Party& p, const InputShares& in, const SecureTrainParams& hp) {
  const std::size_t n = in.n, d = in.d;
  const int f = in.features.frac_bits;
  if (in.features.size() != n * d || in.labels.size() != n) throw ShapeMismatch("training inputs disagree with n, d");
  if (in.model.w.size() != d || in.model.b.size() != 1) throw ShapeMismatch("initial model shares have wrong shape");
  if (!(hp.learning_rate > 0.0) || !std::isfinite(hp.learning_rate)) throw InvalidArgument("learning rate must be positive");
  LinearShares m = in.model;
  const FixedPoint fx{f};

  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    for (const auto& batch : batch_order(n, hp.batch_size, hp.order_seed, epoch)) {
      const std::size_t mb = batch.size();
      SharedVector xb = select_rows(in.features, batch, d);
      SharedVector yb = select_rows(in.labels, batch, 1);

      SharedVector err = mpc::matmul(p, xb, m.w, mb, d, 1);
      for (std::size_t i = 0; i < mb; ++i) err.shares[i] += m.b.shares[0] - yb.shares[i];

      SharedVector grad = mpc::matmul(p, transpose(xb, mb, d), err, d, mb, 1);
      Ring gb = 0;
      for (Ring e : err.shares) gb += e;
      grad.shares.push_back(gb);

      const Ring step = fx.encode(hp.learning_rate / static_cast<double>(mb));
      SharedVector upd = mpc::scale_public(grad, static_cast<std::int64_t>(step));
      upd.frac_bits = 2 * f;
      upd = mpc::truncate(p, upd, f);
      for (std::size_t j = 0; j < d; ++j) m.w.shares[j] -= upd.shares[j];
      m.b.shares[0] -= upd.shares[d];
    }
  }
  return m;
}

Bytes encode_inputs(std::uint64_t session_id, const InputShares& in) {
  ByteWriter w;
  write_header(w, session_id);
  w.u32(static_cast<std::uint32_t>(in.n));
  w.u32(static_cast<std::uint32_t>(in.d));
  w.u8(static_cast<std::uint8_t>(in.features.frac_bits));
  w.u64s(in.features.shares);
  w.u64s(in.labels.shares);
  w.u64s(in.sensitive.shares);
  return std::move(w).take();
}

Bytes encode_weights(std::uint64_t session_id, const LinearShares& m, std::size_t d) {
  ByteWriter w;
  write_header(w, session_id);
  w.u32(static_cast<std::uint32_t>(d));
  w.u64s(m.w.shares);
  w.u64s(m.b.shares);
  return std::move(w).take();
}

Bytes encode_verdict(std::uint64_t session_id, std::uint8_t share) {
  ByteWriter w;
  write_header(w, session_id);
  w.u8(share & 1U);
  return std::move(w).take();
}

Bytes encode_model(std::uint64_t session_id, const LinearShares& m) {
  return encode_weights(session_id, m, m.w.size());
}

void ServerInputState::on_message(const Message& m) {
  if (m.tag == "ABRT") throw mpc::ProtocolAbort("prover aborted");
  if (stage_ == 0 && m.tag == "INPD") {
    in_ = parse_payload(m.payload, [&](ByteReader& r) {
      check_session(r, session_id_);
      InputShares in;
      in.n = r.u32();
      in.d = r.u32();
      int f = r.u8();
      if (in.n == 0 || in.n > kMaxRecords || in.d == 0 || in.d > kMaxDim) throw ProtocolError("input shape out of range");
      if (f != frac_bits_) throw ProtocolError("input encoding differs from the session");
      in.features = make_shares(party_, r.u64s(in.n * in.d), f);
      in.labels = make_shares(party_, r.u64s(in.n), f);
      in.sensitive = make_shares(party_, r.u64s(in.n), 0);
      return in;
    });
    stage_ = 1;
    return;
  }
  if (stage_ == 1 && m.tag == "INPW") {
    in_.model = parse_payload(m.payload, [&](ByteReader& r) {
      check_session(r, session_id_);
      std::size_t d = r.u32();
      if (d != in_.d) throw ProtocolError("initial weights do not match the feature dimension");
      LinearShares ls;
      ls.w = make_shares(party_, r.u64s(d), frac_bits_);
      ls.b = make_shares(party_, r.u64s(1), frac_bits_);
      return ls;
    });
    stage_ = 2;
    return;
  }
  throw ProtocolError("unexpected " + m.tag + " from prover");
}

InputShares ServerInputState::take() {
  if (!complete()) throw ProtocolError("inputs incomplete");
  return std::move(in_);
}

void VerifierOutputState::on_message(const Message& m) {
  if (m.tag == "ABRT") {
    throw mpc::ProtocolAbort("server " + std::to_string(party_) + " aborted: " +
                             std::string(m.payload.begin(), m.payload.end()));
  }
  if (stage_ == 0 && m.tag == "OUTV") {
    verdict_ = parse_payload(m.payload, [&](ByteReader& r) {
      check_session(r, session_id_);
      std::uint8_t v = r.u8();
      if (v > 1) throw ProtocolError("verdict share must be a bit");
      return v;
    });
    stage_ = 1;
    return;
  }
  if (stage_ == 1 && m.tag == "OUTM") {
    model_ = parse_payload(m.payload, [&](ByteReader& r) {
      check_session(r, session_id_);
      std::size_t d = r.u32();
      if (d == 0 || d > kMaxDim) throw ProtocolError("model dimension out of range");
      LinearShares ls;
      ls.w = make_shares(party_, r.u64s(d), frac_bits_);
      ls.b = make_shares(party_, r.u64s(1), frac_bits_);
      return ls;
    });
    stage_ = 2;
    return;
  }
  throw ProtocolError("unexpected " + m.tag + " from server " + std::to_string(party_));
}

void OutsourcedProver::share_inputs(const data::LabeledDataset& ds, const model::MlpModel& init, Channel& to_s1,
                                    Channel& to_s2, ProverAdversary* adversary) {
  // This role never holds an output share, so the adversary has nothing to
  // tamper with.
  (void)adversary;
  const std::size_t n = ds.size(), d = ds.dim();
  check_linear(init, d);
  ChaChaRng rng(derive_seed(seed_, "prover-shares", session_id_), "prover");

  std::vector<double> labels(n);
  std::vector<Ring> sens(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = ds.labels()[i];
    sens[i] = ds.sensitive()[i];
  }
  const auto& layer = init.layers().front();
  auto [x1, x2] = mpc::share(ds.features(), frac_bits_, rng);
  auto [y1, y2] = mpc::share(labels, frac_bits_, rng);
  auto [s1, s2] = mpc::share_encoded(sens, rng, 0);
  auto [w1, w2] = mpc::share(layer.weights, frac_bits_, rng);
  auto [b1, b2] = mpc::share(layer.bias, frac_bits_, rng);

  InputShares in1{n, d, std::move(x1), std::move(y1), std::move(s1), {std::move(w1), std::move(b1)}};
  InputShares in2{n, d, std::move(x2), std::move(y2), std::move(s2), {std::move(w2), std::move(b2)}};
  to_s1.send("INPD", encode_inputs(session_id_, in1));
  to_s2.send("INPD", encode_inputs(session_id_, in2));
  to_s1.send("INPW", encode_weights(session_id_, in1.model, d));
  to_s2.send("INPW", encode_weights(session_id_, in2.model, d));
}

void prover_share_inputs(const data::LabeledDataset& ds, const model::MlpModel& init, Channel& to_s1,
                         Channel& to_s2, std::uint64_t session_id, int frac_bits, std::uint64_t seed) {
  OutsourcedProver(session_id, frac_bits, seed).share_inputs(ds, init, to_s1, to_s2);
}

ServerSession::ServerSession(int party, SessionConfig cfg, Channel& prover, Channel& peer, Channel& verifier,
                             MaterialSource& dealer, SessionTranscript* transcript)
    : party_(party),
      cfg_(std::move(cfg)),
      prover_(prover),
      peer_(peer),
      verifier_(verifier),
      dealer_(dealer),
      transcript_(transcript ? transcript : &own_transcript_) {
  if (party != 1 && party != 2) throw InvalidArgument("server party must be 1 or 2");
  transcript_->attach(prover_, "prover");
  transcript_->attach(peer_, "peer");
  transcript_->attach(verifier_, "verifier");
}

ServerOutput ServerSession::run() {
  try {
    return run_phases();
  } catch (const Error& e) {
    transcript_->end_phase();
    std::string reason = e.what();
    prover_.send_abort(reason);
    peer_.send_abort(reason);
    verifier_.send_abort(reason);
    throw SessionFailure(phase_, reason);
  }
}

ServerOutput ServerSession::run_phases() {
  phase_ = "input";
  transcript_->begin_phase(phase_);
  ServerInputState state(party_, cfg_.session_id, cfg_.frac_bits);
  while (!state.complete()) state.on_message(prover_.recv());
  inputs_ = state.take();
  const InputShares& in = *inputs_;

  // Both servers must have received the same public metadata.
  ByteWriter meta;
  meta.u64(cfg_.session_id);
  meta.u64(in.n);
  meta.u64(in.d);
  Bytes mine = meta.bytes();
  Bytes theirs;
  if (party_ == 1) {
    peer_.send("META", mine);
    theirs = peer_.recv_expect("META");
  } else {
    theirs = peer_.recv_expect("META");
    peer_.send("META", mine);
  }
  if (theirs != mine) throw ProtocolError("servers disagree on session metadata");

  Party party(party_, peer_, dealer_);
  phase_ = "distcheck";
  transcript_->begin_phase(phase_);
  BitShares v = distcheck(party, in.sensitive, in.n, cfg_.spec);

  phase_ = "training";
  transcript_->begin_phase(phase_);
  LinearShares model = secure_train(party, in, cfg_.train);

  phase_ = "output";
  transcript_->begin_phase(phase_);
  verifier_.send("OUTV", encode_verdict(cfg_.session_id, v.bits[0]));
  verifier_.send("OUTM", encode_model(cfg_.session_id, model));
  transcript_->end_phase();
  return {v.bits[0], std::move(model)};
}

AttestationOutcome verifier_finish(Channel& s1, Channel& s2, const SessionConfig& cfg,
                                   std::chrono::milliseconds timeout, SessionTranscript* transcript) {
  auto start = std::chrono::steady_clock::now();
  AttestationOutcome out;
  if (transcript) {
    transcript->attach(s1, "server1");
    transcript->attach(s2, "server2");
    transcript->begin_phase("output");
  }
  s1.set_timeout(timeout);
  s2.set_timeout(timeout);
  VerifierOutputState st1(1, cfg.session_id, cfg.frac_bits), st2(2, cfg.session_id, cfg.frac_bits);
  try {
    while (!st1.complete()) st1.on_message(s1.recv());
    while (!st2.complete()) st2.on_message(s2.recv());
    if (st1.model().w.size() != st2.model().w.size()) throw ProtocolError("servers returned models of different size");
    out.verdict = ((st1.verdict_share() ^ st2.verdict_share()) & 1U) != 0;
    auto w = mpc::reconstruct_raw(st1.model().w, st2.model().w);
    auto b = mpc::reconstruct_raw(st1.model().b, st2.model().b);
    const std::size_t d = w.size();
    const FixedPoint fx{cfg.frac_bits};
    model::MlpModel m({d, 1});
    auto& layer = m.layers().front();
    for (std::size_t j = 0; j < d; ++j) layer.weights[j] = fx.decode(w[j]);
    layer.bias[0] = fx.decode(b[0]);
    out.model = std::move(m);
    out.model_raw = w;
    out.model_raw.push_back(b[0]);
  } catch (const Error& e) {
    out = AttestationOutcome{};
    out.verdict = false;
    out.aborted = true;
    out.abort_reason = e.what();
    if (dynamic_cast<const mpc::ProtocolAbort*>(&e) == nullptr) {
      s1.send_abort(out.abort_reason);
      s2.send_abort(out.abort_reason);
    }
  }
  if (transcript) {
    transcript->end_phase();
    out.comm_bytes = transcript->total_bytes();
    out.phases = transcript->phases();
  }
  out.comp_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::unique_ptr<OutsourcedRun> run_outsourced(const data::LabeledDataset& ds, const model::MlpModel& init,
                                              const SessionConfig& cfg, const SessionSeeds& seeds,
                                              ProverAdversary* adversary) {
  auto run = std::make_unique<OutsourcedRun>();
  auto [p_s1, s1_p] = mpc::make_channel_pair();
  auto [p_s2, s2_p] = mpc::make_channel_pair();
  auto [s1_s2, s2_s1] = mpc::make_channel_pair();
  auto [s1_v, v_s1] = mpc::make_channel_pair();
  auto [s2_v, v_s2] = mpc::make_channel_pair();
  auto dealer = std::make_shared<const mpc::Dealer>(seeds.dealer);
  mpc::LocalDealerSource d1(dealer, 1), d2(dealer, 2);

  ServerSession server1(1, cfg, *s1_p, *s1_s2, *s1_v, d1, &run->server1);
  ServerSession server2(2, cfg, *s2_p, *s2_s1, *s2_v, d2, &run->server2);

  const auto start = std::chrono::steady_clock::now();
  std::string prover_error;
  auto serve = [](ServerSession& s) {
    try {
      s.run();
    } catch (const SessionFailure&) {
      // Already broadcast as ABRT; the verifier reports it.
    }
  };
  std::jthread t1(serve, std::ref(server1));
  std::jthread t2(serve, std::ref(server2));
  std::jthread tp([&] {
    try {
      OutsourcedProver(cfg.session_id, cfg.frac_bits, seeds.prover).share_inputs(ds, init, *p_s1, *p_s2, adversary);
    } catch (const Error& e) {
      prover_error = e.what();
      p_s1->send_abort(prover_error);
      p_s2->send_abort(prover_error);
    }
  });
  run->outcome = verifier_finish(*v_s1, *v_s2, cfg, std::chrono::seconds(600), &run->verifier);
  tp.join();
  t1.join();
  t2.join();

  auto& out = run->outcome;
  out.comp_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.comm_bytes = 0;
  for (const auto* ch : {p_s1.get(), p_s2.get(), s1_s2.get(), s2_s1.get(), s1_v.get(), s2_v.get()})
    out.comm_bytes += ch->bytes_sent();
  out.phases = merge_phases({run->server1.phases(), run->server2.phases()});
  if (!prover_error.empty() && !out.aborted) {
    out.aborted = true;
    out.verdict = false;
    out.abort_reason = "prover: " + prover_error;
  }
  run->s1_inputs = server1.held_inputs();
  run->s2_inputs = server2.held_inputs();
  return run;
}

FidelityResult fidelity_check(const model::MlpModel& m_p, const model::MlpModel& m_2pc, std::size_t k,
                              std::uint64_t seed, int frac_bits) {
  FidelityResult r;
  if (m_p.layer_dims() != m_2pc.layer_dims()) {
    r.reason = "models differ in dimensions";
    return r;
  }
  if (k == 0) {
    r.ok = true;
    r.degenerate = true;
    r.reason = "no probes";
    return r;
  }
  const double tol = std::ldexp(1.0, -(frac_bits - 2));
  Prng rng(derive_seed(seed, "fidelity-probes"));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> x(m_p.input_dim());
  for (std::size_t i = 0; i < k; ++i) {
    for (auto& v : x) v = gauss(rng);
    r.max_abs_diff = std::max(r.max_abs_diff, std::abs(m_p.logit(x) - m_2pc.logit(x)));
  }
  r.ok = r.max_abs_diff <= tol;
  if (!r.ok) r.reason = "outputs differ beyond tolerance";
  return r;
}

void DirectProver::run_distcheck(const SharedVector& sensitive, std::size_t n, const data::PropertySpec& spec) {
  out_ = distcheck(self_, sensitive, n, spec);
}

namespace {

// Direct two-party DistCheck; the prover reveals its (possibly tampered)
// output share to the verifier.
bool direct_verdict(const data::LabeledDataset& ds, const data::PropertySpec& spec, std::uint64_t seed,
                    ProverAdversary* adversary) {
  const std::size_t n = ds.size();
  std::vector<Ring> sens(ds.sensitive().begin(), ds.sensitive().end());
  ChaChaRng rng(derive_seed(seed, "direct-shares"), "prover");
  auto [s1, s2] = mpc::share_encoded(sens, rng, 0);

  auto [prover_ch, verifier_ch] = mpc::make_channel_pair();
  auto dealer = std::make_shared<const mpc::Dealer>(derive_seed(seed, "direct-dealer"));
  mpc::LocalDealerSource d1(dealer, 1), d2(dealer, 2);

  std::exception_ptr prover_err;
  std::jthread prover([&] {
    try {
      Party self(1, *prover_ch, d1);
      DirectProver role(self);
      role.run_distcheck(s1, n, spec);
      if (adversary) adversary->tamper_output(role.output_share());
      prover_ch->send("OUTV", encode_verdict(0, role.output_share().bits[0]));
    } catch (...) {
      prover_err = std::current_exception();
    }
  });
  Party verifier(2, *verifier_ch, d2);
  BitShares mine = distcheck(verifier, s2, n, spec);
  Bytes payload = verifier_ch->recv_expect("OUTV");
  prover.join();
  if (prover_err) std::rethrow_exception(prover_err);
  std::uint8_t theirs = payload.back();
  return ((mine.bits[0] ^ theirs) & 1U) != 0;
}

}  // namespace

FlipBitRecord flipbit_demo(const data::LabeledDataset& ds, const data::PropertySpec& spec, std::uint64_t seed) {
  FlipBitRecord rec;
  rec.truth = data::count_in_window(spec, ds.sensitive_count(), ds.size());
  FlipOutputShare flip;
  rec.honest_verdict = direct_verdict(ds, spec, seed, nullptr);
  rec.tampered_verdict = direct_verdict(ds, spec, seed, &flip);

  SessionConfig cfg;
  cfg.session_id = seed;
  cfg.spec = spec;
  cfg.train.epochs = 0;
  model::MlpModel init({ds.dim(), 1});
  auto run = run_outsourced(ds, init, cfg, {derive_seed(seed, "prover"), derive_seed(seed, "dealer")}, &flip);
  rec.outsourced_verdict = run->outcome.verdict;
  return rec;
}

}  // namespace propattest::proto

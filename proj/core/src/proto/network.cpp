#include "propattest/proto/network.hpp"

#include <thread>

namespace propattest::proto {

namespace {

Bytes hello(Role me, std::uint64_t session_id) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(me));
  w.u64(session_id);
  return std::move(w).take();
}

std::uint16_t port_of(const std::string& endpoint) { return mpc::parse_endpoint(endpoint).second; }
std::string host_of(const std::string& endpoint) { return mpc::parse_endpoint(endpoint).first; }

}  // namespace

const char* role_name(Role r) {
  switch (r) {
    case Role::kProver:
      return "prover";
    case Role::kServer1:
      return "server1";
    case Role::kServer2:
      return "server2";
    case Role::kVerifier:
      return "verifier";
    case Role::kDealer:
      return "dealer";
  }
  return "unknown";
}

std::unique_ptr<Channel> connect_as(const std::string& endpoint, Role me, std::uint64_t session_id,
                                    std::chrono::milliseconds patience) {
  auto [host, port] = mpc::parse_endpoint(endpoint);
  std::unique_ptr<Channel> ch = mpc::TcpChannel::connect(host, port, patience);
  ch->send("HELO", hello(me, session_id));
  return ch;
}

std::map<Role, std::unique_ptr<Channel>> accept_roles(mpc::TcpListener& listener, const std::set<Role>& expected,
                                                      std::uint64_t session_id, std::chrono::milliseconds timeout) {
  std::map<Role, std::unique_ptr<Channel>> out;
  while (out.size() < expected.size()) {
    std::unique_ptr<Channel> ch = listener.accept(timeout);
    ch->set_timeout(timeout);
    Bytes payload = ch->recv_expect("HELO");
    ByteReader r(payload);
    auto role = static_cast<Role>(r.u8());
    std::uint64_t sid = r.u64();
    if (sid != session_id) {
      ch->send_abort("wrong session");
      throw mpc::ProtocolError("connection for another session");
    }
    if (!expected.contains(role) || out.contains(role)) {
      ch->send_abort("unexpected role");
      throw mpc::ProtocolError(std::string("unexpected connection from ") + role_name(role));
    }
    out.emplace(role, std::move(ch));
  }
  return out;
}

std::uint64_t run_dealer_role(const Endpoints& ep, std::uint64_t session_id, std::uint64_t dealer_seed) {
  mpc::TcpListener listener(port_of(ep.dealer), host_of(ep.dealer));
  auto links = accept_roles(listener, {Role::kServer1, Role::kServer2}, session_id);
  mpc::Dealer dealer(dealer_seed);
  for (auto& [role, ch] : links) ch->set_timeout(std::chrono::minutes(10));
  std::uint64_t served2 = 0;
  std::exception_ptr err;
  std::jthread second([&] {
    try {
      served2 = mpc::serve_dealer(dealer, *links.at(Role::kServer2), 2);
    } catch (...) {
      err = std::current_exception();
    }
  });
  std::uint64_t served1 = mpc::serve_dealer(dealer, *links.at(Role::kServer1), 1);
  second.join();
  if (err) std::rethrow_exception(err);
  return served1 + served2;
}

ServerRoleResult run_server_role(int party, const SessionConfig& cfg, const Endpoints& ep) {
  const Role me = party == 1 ? Role::kServer1 : Role::kServer2;
  const std::string& mine = party == 1 ? ep.server1 : ep.server2;
  mpc::TcpListener listener(port_of(mine), host_of(mine));
  std::unique_ptr<Channel> dealer_ch = connect_as(ep.dealer, me, cfg.session_id);

  std::unique_ptr<Channel> prover, peer, verifier;
  if (party == 1) {
    auto links = accept_roles(listener, {Role::kProver, Role::kServer2, Role::kVerifier}, cfg.session_id);
    prover = std::move(links.at(Role::kProver));
    peer = std::move(links.at(Role::kServer2));
    verifier = std::move(links.at(Role::kVerifier));
  } else {
    peer = connect_as(ep.server1, me, cfg.session_id);
    auto links = accept_roles(listener, {Role::kProver, Role::kVerifier}, cfg.session_id);
    prover = std::move(links.at(Role::kProver));
    verifier = std::move(links.at(Role::kVerifier));
  }
  for (auto* ch : {prover.get(), peer.get(), verifier.get(), dealer_ch.get()}) ch->set_timeout(std::chrono::minutes(5));

  mpc::RemoteDealerSource source(*dealer_ch, party);
  ServerSession session(party, cfg, *prover, *peer, *verifier, source);
  ServerRoleResult res;
  try {
    res.output = session.run();
  } catch (...) {
    dealer_ch->send_abort("server failed");
    throw;
  }
  source.finish();
  res.phases = session.transcript().phases();
  res.bytes = session.transcript().total_bytes();
  return res;
}

void run_prover_role(const data::LabeledDataset& ds, const model::MlpModel& init, const SessionConfig& cfg,
                     std::uint64_t prover_seed, const Endpoints& ep) {
  auto s1 = connect_as(ep.server1, Role::kProver, cfg.session_id);
  auto s2 = connect_as(ep.server2, Role::kProver, cfg.session_id);
  OutsourcedProver(cfg.session_id, cfg.frac_bits, prover_seed).share_inputs(ds, init, *s1, *s2);
}

AttestationOutcome run_verifier_role(const SessionConfig& cfg, const Endpoints& ep,
                                     std::chrono::milliseconds timeout) {
  auto s1 = connect_as(ep.server1, Role::kVerifier, cfg.session_id);
  auto s2 = connect_as(ep.server2, Role::kVerifier, cfg.session_id);
  SessionTranscript t;
  return verifier_finish(*s1, *s2, cfg, timeout, &t);
}

}  // namespace propattest::proto

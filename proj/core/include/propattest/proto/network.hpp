#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>

#include "propattest/proto/protocol.hpp"

namespace propattest::proto {

enum class Role : std::uint8_t { kProver = 1, kServer1 = 2, kServer2 = 3, kVerifier = 4, kDealer = 5 };

const char* role_name(Role r);

// Socket layout: the dealer listens for both servers; server 1 listens for
// the prover, server 2 and the verifier; server 2 listens for the prover and
// the verifier. Every connection opens with HELO(role, session id).
struct Endpoints {
  std::string server1 = "127.0.0.1:47101";
  std::string server2 = "127.0.0.1:47102";
  std::string dealer = "127.0.0.1:47103";
};

std::unique_ptr<Channel> connect_as(const std::string& endpoint, Role me, std::uint64_t session_id,
                                    std::chrono::milliseconds patience = std::chrono::seconds(20));

std::map<Role, std::unique_ptr<Channel>> accept_roles(mpc::TcpListener& listener, const std::set<Role>& expected,
                                                      std::uint64_t session_id,
                                                      std::chrono::milliseconds timeout = std::chrono::seconds(30));

// Serves both servers until they finish. Returns items served.
std::uint64_t run_dealer_role(const Endpoints& ep, std::uint64_t session_id, std::uint64_t dealer_seed);

struct ServerRoleResult {
  ServerOutput output;
  std::vector<PhaseStats> phases;
  std::uint64_t bytes = 0;
};

ServerRoleResult run_server_role(int party, const SessionConfig& cfg, const Endpoints& ep);

void run_prover_role(const data::LabeledDataset& ds, const model::MlpModel& init, const SessionConfig& cfg,
                     std::uint64_t prover_seed, const Endpoints& ep);

AttestationOutcome run_verifier_role(const SessionConfig& cfg, const Endpoints& ep,
                                     std::chrono::milliseconds timeout = std::chrono::seconds(120));

}  // namespace propattest::proto

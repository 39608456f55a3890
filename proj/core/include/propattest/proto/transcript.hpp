#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "propattest/mpc/channel.hpp"

namespace propattest::proto {

using mpc::Channel;
using mpc::Direction;
using mpc::Message;

struct PhaseStats {
  std::string phase;
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  double millis = 0.0;
};

struct TranscriptEntry {
  std::string link;
  Direction direction = Direction::kSent;
  Message message;
};

// Everything one role sent and received, split into named phases.
class SessionTranscript {
 public:
  // Records traffic on `ch` under the given link name. The transcript must
  // outlive the attachment.
  void attach(Channel& ch, std::string link);

  void begin_phase(const std::string& name);
  void end_phase();

  const std::vector<TranscriptEntry>& entries() const { return entries_; }
  std::vector<PhaseStats> phases() const;
  PhaseStats phase(const std::string& name) const;
  std::uint64_t total_bytes() const;
  std::uint64_t link_bytes(const std::string& link) const;

  // phase,bytes_sent,bytes_received,millis
  std::string csv() const;
  // SHA-256 over the ordered entries (timings excluded).
  std::string digest() const;

 private:
  void record(const std::string& link, Direction dir, const Message& m);
  void close_open_phase();

  mutable std::mutex mu_;
  std::vector<TranscriptEntry> entries_;
  std::vector<PhaseStats> phases_;
  std::map<std::string, std::uint64_t> per_link_;
  std::string current_;
  std::chrono::steady_clock::time_point started_;
};

// Adds per-phase stats of several roles.
std::vector<PhaseStats> merge_phases(const std::vector<std::vector<PhaseStats>>& parts);
std::string phases_csv(const std::vector<PhaseStats>& phases);

}  // namespace propattest::proto

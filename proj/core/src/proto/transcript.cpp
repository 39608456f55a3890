#include "propattest/proto/transcript.hpp"

#include <algorithm>
#include <sstream>

#include "propattest/common/binary_io.hpp"
#include "propattest/common/checksum.hpp"

namespace propattest::proto {

void SessionTranscript::attach(Channel& ch, std::string link) {
  ch.set_observer([this, link = std::move(link)](Direction dir, const Message& m) { record(link, dir, m); });
}

void SessionTranscript::record(const std::string& link, Direction dir, const Message& m) {
  std::lock_guard lock(mu_);
  entries_.push_back({link, dir, m});
  const std::uint64_t wire = mpc::kHeaderBytes + m.payload.size();
  per_link_[link] += wire;
  if (phases_.empty() || current_.empty()) {
    phases_.push_back({"unphased", 0, 0, 0.0});
    current_ = "unphased";
    started_ = std::chrono::steady_clock::now();
  }
  auto& ph = phases_.back();
  (dir == Direction::kSent ? ph.bytes_sent : ph.bytes_received) += wire;
}

void SessionTranscript::close_open_phase() {
  if (current_.empty() || phases_.empty()) return;
  phases_.back().millis +=
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started_).count();
  current_.clear();
}

void SessionTranscript::begin_phase(const std::string& name) {
  std::lock_guard lock(mu_);
  close_open_phase();
  phases_.push_back({name, 0, 0, 0.0});
  current_ = name;
  started_ = std::chrono::steady_clock::now();
}

void SessionTranscript::end_phase() {
  std::lock_guard lock(mu_);
  close_open_phase();
}

std::vector<PhaseStats> SessionTranscript::phases() const {
  std::lock_guard lock(mu_);
  // Repeated phase names are folded together, first occurrence order kept.
  std::vector<PhaseStats> out;
  for (const auto& p : phases_) {
    auto it = std::find_if(out.begin(), out.end(), [&](const PhaseStats& q) { return q.phase == p.phase; });
    if (it == out.end()) {
      out.push_back(p);
    } else {
      it->bytes_sent += p.bytes_sent;
      it->bytes_received += p.bytes_received;
      it->millis += p.millis;
    }
  }
  return out;
}

PhaseStats SessionTranscript::phase(const std::string& name) const {
  for (const auto& p : phases())
    if (p.phase == name) return p;
  return {name, 0, 0, 0.0};
}

std::uint64_t SessionTranscript::total_bytes() const {
  std::lock_guard lock(mu_);
  std::uint64_t total = 0;
  for (const auto& [link, bytes] : per_link_) total += bytes;
  return total;
}

std::uint64_t SessionTranscript::link_bytes(const std::string& link) const {
  std::lock_guard lock(mu_);
  auto it = per_link_.find(link);
  return it == per_link_.end() ? 0 : it->second;
}

std::string phases_csv(const std::vector<PhaseStats>& phases) {
  std::ostringstream os;
  os << "phase,bytes_sent,bytes_received,millis\n";
  for (const auto& p : phases) os << p.phase << ',' << p.bytes_sent << ',' << p.bytes_received << ',' << p.millis << '\n';
  return os.str();
}

std::string SessionTranscript::csv() const { return phases_csv(phases()); }

std::string SessionTranscript::digest() const {
  std::lock_guard lock(mu_);
  ByteWriter w;
  for (const auto& e : entries_) {
    w.str(e.link);
    w.u8(e.direction == Direction::kSent ? 0 : 1);
    w.raw(encode_frame(e.message));
  }
  return sha256_hex(w.bytes());
}

std::vector<PhaseStats> merge_phases(const std::vector<std::vector<PhaseStats>>& parts) {
  std::vector<PhaseStats> out;
  for (const auto& part : parts) {
    for (const auto& p : part) {
      auto it = std::find_if(out.begin(), out.end(), [&](const PhaseStats& q) { return q.phase == p.phase; });
      if (it == out.end()) {
        out.push_back(p);
      } else {
        it->bytes_sent += p.bytes_sent;
        it->bytes_received += p.bytes_received;
        it->millis = std::max(it->millis, p.millis);
      }
    }
  }
  return out;
}

}  // namespace propattest::proto

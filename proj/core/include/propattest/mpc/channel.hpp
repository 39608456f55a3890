#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "propattest/common/binary_io.hpp"
#include "propattest/common/error.hpp"

namespace propattest::mpc {

// Framed message: 4-byte ASCII tag, 8-byte little-endian length, payload.
struct Message {
  std::string tag;
  Bytes payload;

  friend bool operator==(const Message&, const Message&) = default;
};

inline constexpr std::size_t kHeaderBytes = 12;
inline constexpr std::uint64_t kMaxPayload = std::uint64_t{1} << 32;

bool is_known_tag(std::string_view tag);

Bytes encode_frame(const Message& m);

// Peer broke the protocol: malformed frame, unknown or unexpected tag, bad
// payload shape.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Peer sent ABRT.
class ProtocolAbort : public Error {
 public:
  using Error::Error;
};

// Transport closed or timed out.
class ChannelError : public Error {
 public:
  using Error::Error;
};

enum class Direction { kSent, kReceived };

class Channel {
 public:
  using Observer = std::function<void(Direction, const Message&)>;

  virtual ~Channel() = default;

  void send(const Message& m);
  void send(std::string_view tag, Bytes payload) { send(Message{std::string(tag), std::move(payload)}); }
  Message recv();
  // Receives one message and requires the given tag. ABRT raises
  // ProtocolAbort, any other tag ProtocolError.
  Bytes recv_expect(std::string_view tag);
  // Best-effort ABRT; transport failures are swallowed.
  void send_abort(std::string_view reason) noexcept;

  virtual void close() = 0;

  std::uint64_t bytes_sent() const { return sent_; }
  std::uint64_t bytes_received() const { return received_; }
  void set_observer(Observer obs) { observer_ = std::move(obs); }
  void set_timeout(std::chrono::milliseconds t) { timeout_ = t; }
  std::chrono::milliseconds timeout() const { return timeout_; }

 protected:
  virtual void write_bytes(std::span<const std::uint8_t> data) = 0;
  virtual void read_exact(std::span<std::uint8_t> out) = 0;

 private:
  std::uint64_t sent_ = 0;
  std::uint64_t received_ = 0;
  Observer observer_;
  std::chrono::milliseconds timeout_{60000};
};

// One direction of an in-process byte pipe.
class BytePipe {
 public:
  void write(std::span<const std::uint8_t> data);
  void read(std::span<std::uint8_t> out, std::chrono::milliseconds timeout);
  void close();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::uint8_t> buf_;
  bool closed_ = false;
};

class InProcessChannel final : public Channel {
 public:
  InProcessChannel(std::shared_ptr<BytePipe> out, std::shared_ptr<BytePipe> in)
      : out_(std::move(out)), in_(std::move(in)) {}
  ~InProcessChannel() override { close(); }
  void close() override;

 protected:
  void write_bytes(std::span<const std::uint8_t> data) override { out_->write(data); }
  void read_exact(std::span<std::uint8_t> out) override { in_->read(out, timeout()); }

 private:
  std::shared_ptr<BytePipe> out_;
  std::shared_ptr<BytePipe> in_;
};

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_channel_pair();

class TcpChannel final : public Channel {
 public:
  explicit TcpChannel(int fd) : fd_(fd) {}
  ~TcpChannel() override { close(); }
  TcpChannel(const TcpChannel&) = delete;
  TcpChannel& operator=(const TcpChannel&) = delete;

  // Retries until `patience` elapses so roles may start in any order.
  static std::unique_ptr<TcpChannel> connect(const std::string& host, std::uint16_t port,
                                             std::chrono::milliseconds patience = std::chrono::seconds(10));
  void close() override;

 protected:
  void write_bytes(std::span<const std::uint8_t> data) override;
  void read_exact(std::span<std::uint8_t> out) override;

 private:
  int fd_ = -1;
};

class TcpListener {
 public:
  // port 0 picks a free port.
  explicit TcpListener(std::uint16_t port, const std::string& bind_host = "127.0.0.1");
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  std::unique_ptr<TcpChannel> accept(std::chrono::milliseconds timeout = std::chrono::seconds(30));

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

// "host:port" split; throws InvalidArgument.
std::pair<std::string, std::uint16_t> parse_endpoint(std::string_view endpoint);

}  // namespace propattest::mpc

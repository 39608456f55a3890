#include "propattest/mpc/channel.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <thread>

namespace propattest::mpc {

namespace {

constexpr std::array<std::string_view, 13> kTags = {"HELO", "INPD", "INPW", "META", "MULX", "MASK", "CMPB",
                                                   "OUTV", "OUTM", "ABRT", "DREQ", "DMAT", "DEND"};

}  // namespace

bool is_known_tag(std::string_view tag) { return std::find(kTags.begin(), kTags.end(), tag) != kTags.end(); }

Bytes encode_frame(const Message& m) {
  if (m.tag.size() != 4) throw InvalidArgument("message tag must be four bytes");
  ByteWriter w;
  w.raw({reinterpret_cast<const std::uint8_t*>(m.tag.data()), 4});
  w.u64(m.payload.size());
  w.raw(m.payload);
  return std::move(w).take();
}

void Channel::send(const Message& m) {
  if (!is_known_tag(m.tag)) throw InvalidArgument("refusing to send unknown tag " + m.tag);
  auto frame = encode_frame(m);
  write_bytes(frame);
  sent_ += frame.size();
  if (observer_) observer_(Direction::kSent, m);
}

Message Channel::recv() {
  std::array<std::uint8_t, kHeaderBytes> header{};
  read_exact(header);
  received_ += header.size();
  Message m;
  m.tag.assign(reinterpret_cast<const char*>(header.data()), 4);
  ByteReader r({header.data() + 4, 8});
  std::uint64_t len = r.u64();
  if (!is_known_tag(m.tag)) throw ProtocolError("unknown message tag");
  if (len > kMaxPayload) throw ProtocolError("message length exceeds limit");
  m.payload.resize(len);
  if (len > 0) read_exact(m.payload);
  received_ += len;
  if (observer_) observer_(Direction::kReceived, m);
  return m;
}

Bytes Channel::recv_expect(std::string_view tag) {
  Message m = recv();
  if (m.tag == "ABRT") throw ProtocolAbort("peer aborted: " + std::string(m.payload.begin(), m.payload.end()));
  if (m.tag != tag) throw ProtocolError("expected " + std::string(tag) + ", got " + m.tag);
  return std::move(m.payload);
}

void Channel::send_abort(std::string_view reason) noexcept {
  try {
    send("ABRT", Bytes(reason.begin(), reason.end()));
  } catch (...) {
  }
}

void BytePipe::write(std::span<const std::uint8_t> data) {
  {
    std::lock_guard lock(mu_);
    if (closed_) throw ChannelError("channel closed");
    buf_.insert(buf_.end(), data.begin(), data.end());
  }
  cv_.notify_all();
}

void BytePipe::read(std::span<std::uint8_t> out, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  if (!cv_.wait_for(lock, timeout, [&] { return buf_.size() >= out.size() || closed_; })) {
    throw ChannelError("timed out waiting for peer");
  }
  if (buf_.size() < out.size()) throw ChannelError("channel closed");
  std::copy_n(buf_.begin(), out.size(), out.begin());
  buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(out.size()));
}

void BytePipe::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

void InProcessChannel::close() {
  out_->close();
  in_->close();
}

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_channel_pair() {
  auto ab = std::make_shared<BytePipe>();
  auto ba = std::make_shared<BytePipe>();
  return {std::make_unique<InProcessChannel>(ab, ba), std::make_unique<InProcessChannel>(ba, ab)};
}

std::unique_ptr<TcpChannel> TcpChannel::connect(const std::string& host, std::uint16_t port,
                                                std::chrono::milliseconds patience) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  auto port_str = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), port_str.c_str(), &hints, &res); rc != 0) {
    throw ChannelError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  auto deadline = std::chrono::steady_clock::now() + patience;
  for (;;) {
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
      int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
        ::freeaddrinfo(res);
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
        return std::make_unique<TcpChannel>(fd);
      }
      ::close(fd);
    }
    if (std::chrono::steady_clock::now() >= deadline) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  ::freeaddrinfo(res);
  throw ChannelError("cannot connect to " + host + ":" + port_str);
}

void TcpChannel::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

void TcpChannel::write_bytes(std::span<const std::uint8_t> data) {
  if (fd_ < 0) throw ChannelError("channel closed");
  std::size_t done = 0;
  while (done < data.size()) {
    ssize_t n = ::send(fd_, data.data() + done, data.size() - done, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw ChannelError(std::string("send failed: ") + std::strerror(errno));
    done += static_cast<std::size_t>(n);
  }
}

void TcpChannel::read_exact(std::span<std::uint8_t> out) {
  if (fd_ < 0) throw ChannelError("channel closed");
  std::size_t done = 0;
  auto deadline = std::chrono::steady_clock::now() + timeout();
  while (done < out.size()) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw ChannelError("timed out waiting for peer");
    pollfd p{fd_, POLLIN, 0};
    int rc = ::poll(&p, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
    if (rc < 0 && errno == EINTR) continue;
    if (rc < 0) throw ChannelError(std::string("poll failed: ") + std::strerror(errno));
    if (rc == 0) continue;
    ssize_t n = ::recv(fd_, out.data() + done, out.size() - done, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n == 0) throw ChannelError("peer closed the connection");
    if (n < 0) throw ChannelError(std::string("recv failed: ") + std::strerror(errno));
    done += static_cast<std::size_t>(n);
  }
}

TcpListener::TcpListener(std::uint16_t port, const std::string& bind_host) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw ChannelError("cannot create socket");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, bind_host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw InvalidArgument("bind address must be an IPv4 literal: " + bind_host);
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd_, 8) != 0) {
    std::string why = std::strerror(errno);
    ::close(fd_);
    throw ChannelError("cannot listen on port " + std::to_string(port) + ": " + why);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpChannel> TcpListener::accept(std::chrono::milliseconds timeout) {
  pollfd p{fd_, POLLIN, 0};
  int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
  if (rc <= 0) throw ChannelError("no connection within the accept timeout");
  int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) throw ChannelError(std::string("accept failed: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return std::make_unique<TcpChannel>(fd);
}

std::pair<std::string, std::uint16_t> parse_endpoint(std::string_view endpoint) {
  auto colon = endpoint.rfind(':');
  if (colon == std::string_view::npos || colon == 0) throw InvalidArgument("endpoint must be host:port");
  unsigned port = 0;
  auto tail = endpoint.substr(colon + 1);
  auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), port);
  if (ec != std::errc{} || ptr != tail.data() + tail.size() || port > 65535) {
    throw InvalidArgument("bad port in endpoint " + std::string(endpoint));
  }
  return {std::string(endpoint.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

}  // namespace propattest::mpc

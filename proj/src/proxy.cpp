#include "sipwall/proxy.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <algorithm>
#include <iostream>
#include <thread>
#include <vector>

namespace sipwall {

namespace {

sockaddr_in resolve_ipv4(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (ep.host.empty() || ep.host == "*") {
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    return addr;
  }
  if (inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_DGRAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0 || !res)
    throw ProxyError("cannot resolve " + ep.host);
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

Endpoint to_endpoint(const sockaddr_in& addr) {
  char buf[INET_ADDRSTRLEN] = {};
  inet_ntop(AF_INET, &addr.sin_addr, buf, sizeof buf);
  return {buf, ntohs(addr.sin_port)};
}

}  // namespace

UdpProxy::UdpProxy(ProxyConfig config, Engine& engine) : config_(std::move(config)), engine_(engine) {
  if (config_.listen == config_.upstream) throw ProxyError("listen and upstream endpoints must differ");
  listen_fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
  send_fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (listen_fd_ < 0 || send_fd_ < 0) throw ProxyError(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr = resolve_ipv4(config_.listen);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    std::string err = std::strerror(errno);
    ::close(listen_fd_);
    ::close(send_fd_);
    throw ProxyError("bind " + config_.listen.str() + ": " + err);
  }
}

UdpProxy::~UdpProxy() {
  if (listen_fd_ >= 0) ::close(listen_fd_);
  if (send_fd_ >= 0) ::close(send_fd_);
}

Endpoint UdpProxy::local_endpoint() const {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  return to_endpoint(addr);
}

ProxyReport UdpProxy::run(const std::atomic<bool>& stop) {
  using Clock = std::chrono::steady_clock;
  ProxyReport report;
  const sockaddr_in upstream = resolve_ipv4(config_.upstream);
  const Endpoint local = local_endpoint();
  const auto origin = Clock::now();
  Clock::time_point next_send = origin;
  std::vector<char> buf(65536);
  Timestamp now{0};

  while (!stop.load()) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    int ready = ::poll(&pfd, 1, 100);
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw ProxyError(std::string("poll: ") + std::strerror(errno));
    }
    if (ready == 0) continue;

    sockaddr_in from{};
    socklen_t from_len = sizeof from;
    ssize_t n = ::recvfrom(listen_fd_, buf.data(), buf.size(), 0, reinterpret_cast<sockaddr*>(&from), &from_len);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw ProxyError(std::string("recvfrom: ") + std::strerror(errno));
    }
    now = std::chrono::duration_cast<Timestamp>(Clock::now() - origin);
    ++report.received;

    MessageMeta meta{Direction::inbound, to_endpoint(from), local, now};
    std::string_view payload(buf.data(), static_cast<std::size_t>(n));
    Verdict v = engine_.process_message(payload, meta);
    report.latency_us.push_back(std::chrono::duration<double, std::micro>(v.processing_time).count());
    if (v.malformed) {
      ++report.malformed;
      continue;
    }
    if (v.decision == Decision::drop) {
      ++report.dropped;
      continue;
    }
    if (config_.rate_limit) {
      std::this_thread::sleep_until(next_send);
      next_send = std::max(next_send, Clock::now()) +
                  std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / *config_.rate_limit));
    }
    ssize_t sent = ::sendto(send_fd_, payload.data(), payload.size(), 0,
                            reinterpret_cast<const sockaddr*>(&upstream), sizeof upstream);
    if (sent != n) {
      std::cerr << "sipwall: upstream send failed: " << std::strerror(errno) << '\n';
      ++report.send_errors;
      ++report.dropped;
      continue;
    }
    ++report.forwarded;
  }
  engine_.finish(now);
  return report;
}

}  // namespace sipwall

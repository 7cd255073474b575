#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sipwall/endpoint.hpp"
#include "sipwall/engine.hpp"

namespace sipwall {

struct ProxyConfig {
  Endpoint listen;
  Endpoint upstream;
  std::optional<double> rate_limit;  // max forwarded messages per second
};

struct ProxyReport {
  std::uint64_t received = 0;
  std::uint64_t forwarded = 0;
  std::uint64_t dropped = 0;  // rule drops plus failed upstream sends
  std::uint64_t malformed = 0;
  std::uint64_t send_errors = 0;
  std::vector<double> latency_us;  // engine time per datagram
};

class ProxyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inline UDP relay: each datagram on the listen socket is inspected and,
// when forwarded, sent unchanged to the upstream endpoint.
class UdpProxy {
 public:
  // Binds immediately; throws ProxyError on bind failure or when listen and
  // upstream are the same endpoint.
  UdpProxy(ProxyConfig config, Engine& engine);
  ~UdpProxy();
  UdpProxy(const UdpProxy&) = delete;
  UdpProxy& operator=(const UdpProxy&) = delete;

  // Actual bound address (useful with port 0).
  Endpoint local_endpoint() const;

  // Serves until `stop` becomes true.
  ProxyReport run(const std::atomic<bool>& stop);

 private:
  ProxyConfig config_;
  Engine& engine_;
  int listen_fd_ = -1;
  int send_fd_ = -1;
};

}  // namespace sipwall

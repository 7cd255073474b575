#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace sipwall {

enum class Direction : std::uint8_t { inbound, outbound };

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;

  std::string str() const { return host + ":" + std::to_string(port); }
  auto operator<=>(const Endpoint&) const = default;
};

// "host:port"; IPv4 or hostname. Nullopt on bad syntax or port.
std::optional<Endpoint> parse_endpoint(std::string_view text);

}  // namespace sipwall

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sipwall/endpoint.hpp"
#include "sipwall/state_store.hpp"

namespace sipwall {

struct TraceRecord {
  Timestamp timestamp{0};
  Direction direction = Direction::inbound;
  Endpoint source;
  Endpoint dest;
  std::string payload;

  bool operator==(const TraceRecord&) const = default;
};

enum class TraceFormat : std::uint8_t { pcap, ndtrace };

class TraceError : public std::runtime_error {
 public:
  TraceError(std::size_t record, const std::string& what)
      : std::runtime_error(record ? "record " + std::to_string(record) + ": " + what : what), record_(record) {}
  std::size_t record() const { return record_; }

 private:
  std::size_t record_;
};

inline constexpr std::uint16_t kDefaultSipPort = 5060;

// Records in file order. pcap input keeps IPv4/UDP datagrams with the SIP
// port on either side; a datagram addressed to the port is inbound.
std::vector<TraceRecord> read_trace(const std::filesystem::path& path, TraceFormat format,
                                    std::uint16_t sip_port = kDefaultSipPort);

std::vector<TraceRecord> parse_ndtrace(std::string_view contents);
std::vector<TraceRecord> parse_pcap(std::string_view contents, std::uint16_t sip_port = kDefaultSipPort);

// ndtrace: "#ndtrace v1" header, then per record
//   ts=<sec.usec> dir=<in|out> src=<host:port> dst=<host:port> len=<n>\n
// followed by exactly n payload bytes and "\n".
void write_ndtrace(std::span<const TraceRecord> records, std::ostream& out);
void write_trace(std::span<const TraceRecord> records, const std::filesystem::path& path);

// Classic little-endian pcap (microsecond timestamps, Ethernet link type),
// one IPv4/UDP frame per record.
std::string encode_pcap(std::span<const TraceRecord> records);

std::string format_timestamp(Timestamp ts);

}  // namespace sipwall

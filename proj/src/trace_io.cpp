#include "sipwall/trace_io.hpp"

#include <cstdio>
#include <array>
#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "text_util.hpp"

namespace sipwall {

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError(0, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw TraceError(0, "cannot read " + path.string());
  return std::move(ss).str();
}

std::optional<Timestamp> parse_ts(std::string_view s) {
  auto dot = s.find('.');
  std::string_view whole = s.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
  if (whole.empty() || frac.size() > 6) return std::nullopt;
  auto secs = detail::parse_int(whole);
  if (!secs || *secs < 0) return std::nullopt;
  std::int64_t micros = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    micros *= 10;
    if (i < frac.size()) {
      if (!std::isdigit(static_cast<unsigned char>(frac[i]))) return std::nullopt;
      micros += frac[i] - '0';
    }
  }
  return Timestamp(*secs * 1'000'000 + micros);
}

std::string ipv4_string(const unsigned char* p) {
  return std::to_string(p[0]) + "." + std::to_string(p[1]) + "." + std::to_string(p[2]) + "." + std::to_string(p[3]);
}

struct PcapCursor {
  std::string_view data;
  bool swapped = false;

  std::uint32_t u32(std::size_t off) const {
    std::uint32_t v;
    std::memcpy(&v, data.data() + off, 4);
    return swapped ? __builtin_bswap32(v) : v;
  }
};

std::uint16_t be16(const unsigned char* p) { return static_cast<std::uint16_t>((p[0] << 8) | p[1]); }

// Offset of the IPv4 header inside a captured frame, or nullopt when the
// frame does not carry IPv4.
std::optional<std::size_t> ipv4_offset(std::uint32_t linktype, const unsigned char* f, std::size_t len) {
  switch (linktype) {
    case 0: {  // BSD loopback
      if (len < 4) return std::nullopt;
      std::uint32_t family;
      std::memcpy(&family, f, 4);
      return family == 2 || __builtin_bswap32(family) == 2 ? std::optional<std::size_t>(4) : std::nullopt;
    }
    case 1: {  // Ethernet, optionally 802.1Q tagged
      std::size_t off = 12;
      if (len < 14) return std::nullopt;
      std::uint16_t type = be16(f + off);
      while ((type == 0x8100 || type == 0x88a8) && len >= off + 6) {
        off += 4;
        type = be16(f + off);
      }
      return type == 0x0800 ? std::optional<std::size_t>(off + 2) : std::nullopt;
    }
    case 12:
    case 14:
    case 101:  // raw IP
      return 0;
    case 113:  // Linux cooked
      if (len < 16 || be16(f + 14) != 0x0800) return std::nullopt;
      return 16;
    case 276:  // Linux cooked v2
      if (len < 20 || be16(f) != 0x0800) return std::nullopt;
      return 20;
    default:
      return std::nullopt;
  }
}

void put_le32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}
void put_le16(std::string& out, std::uint16_t v) {
  out += static_cast<char>(v & 0xff);
  out += static_cast<char>(v >> 8);
}
void put_be16(std::string& out, std::uint16_t v) {
  out += static_cast<char>(v >> 8);
  out += static_cast<char>(v & 0xff);
}

std::array<unsigned char, 4> ipv4_bytes(const std::string& host) {
  std::array<unsigned char, 4> out{};
  unsigned a, b, c, d;
  char tail;
  if (std::sscanf(host.c_str(), "%u.%u.%u.%u%c", &a, &b, &c, &d, &tail) == 4 && a < 256 && b < 256 && c < 256 &&
      d < 256)
    out = {static_cast<unsigned char>(a), static_cast<unsigned char>(b), static_cast<unsigned char>(c),
           static_cast<unsigned char>(d)};
  return out;
}

}  // namespace

std::string format_timestamp(Timestamp ts) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%lld.%06lld", static_cast<long long>(ts.count() / 1'000'000),
                static_cast<long long>(ts.count() % 1'000'000));
  return buf;
}

std::vector<TraceRecord> parse_ndtrace(std::string_view contents) {
  std::vector<TraceRecord> out;
  if (contents.empty()) return out;
  constexpr std::string_view kHeader = "#ndtrace v1\n";
  if (contents.substr(0, kHeader.size()) != kHeader) throw TraceError(0, "missing '#ndtrace v1' header");
  std::size_t pos = kHeader.size();
  std::size_t index = 0;
  while (pos < contents.size()) {
    ++index;
    std::size_t nl = contents.find('\n', pos);
    if (nl == std::string_view::npos) throw TraceError(index, "truncated record header");
    std::string_view line = contents.substr(pos, nl - pos);
    pos = nl + 1;

    static constexpr std::string_view kKeys[] = {"ts=", "dir=", "src=", "dst=", "len="};
    std::string_view fields[5];
    std::size_t fpos = 0;
    for (std::size_t k = 0; k < 5; ++k) {
      std::size_t sp = line.find(' ', fpos);
      std::string_view tok = line.substr(fpos, sp == std::string_view::npos ? std::string_view::npos : sp - fpos);
      if (tok.substr(0, kKeys[k].size()) != kKeys[k]) throw TraceError(index, "expected field " + std::string(kKeys[k]));
      fields[k] = tok.substr(kKeys[k].size());
      if (k < 4 && sp == std::string_view::npos) throw TraceError(index, "truncated record header");
      if (k == 4 && sp != std::string_view::npos) throw TraceError(index, "trailing data in record header");
      fpos = sp + 1;
    }

    TraceRecord rec;
    auto ts = parse_ts(fields[0]);
    if (!ts) throw TraceError(index, "bad timestamp");
    rec.timestamp = *ts;
    if (fields[1] == "in") rec.direction = Direction::inbound;
    else if (fields[1] == "out") rec.direction = Direction::outbound;
    else throw TraceError(index, "bad direction");
    auto src = parse_endpoint(fields[2]);
    auto dst = parse_endpoint(fields[3]);
    if (!src || !dst) throw TraceError(index, "bad endpoint");
    rec.source = *src;
    rec.dest = *dst;
    auto len = detail::parse_int(fields[4]);
    if (!len || *len <= 0) throw TraceError(index, "payload length must be positive");
    auto n = static_cast<std::size_t>(*len);
    if (pos + n + 1 > contents.size() || contents[pos + n] != '\n') throw TraceError(index, "truncated payload");
    rec.payload.assign(contents.substr(pos, n));
    pos += n + 1;

    if (!out.empty() && rec.timestamp < out.back().timestamp) throw TraceError(index, "timestamps go backwards");
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<TraceRecord> parse_pcap(std::string_view contents, std::uint16_t sip_port) {
  std::vector<TraceRecord> out;
  if (contents.empty()) return out;
  if (contents.size() < 24) throw TraceError(0, "truncated pcap global header");

  PcapCursor cur{contents};
  std::uint32_t magic;
  std::memcpy(&magic, contents.data(), 4);
  bool nanos = false;
  switch (magic) {
    case 0xa1b2c3d4: break;
    case 0xd4c3b2a1: cur.swapped = true; break;
    case 0xa1b23c4d: nanos = true; break;
    case 0x4d3cb2a1: cur.swapped = true; nanos = true; break;
    default: throw TraceError(0, "not a pcap file");
  }
  std::uint32_t linktype = cur.u32(20) & 0x0fffffff;

  std::size_t pos = 24;
  std::size_t index = 0;
  while (pos < contents.size()) {
    ++index;
    if (pos + 16 > contents.size()) throw TraceError(index, "truncated packet header");
    std::uint32_t sec = cur.u32(pos), frac = cur.u32(pos + 4), incl = cur.u32(pos + 8);
    pos += 16;
    if (incl > contents.size() - pos) throw TraceError(index, "packet length exceeds file");
    const auto* f = reinterpret_cast<const unsigned char*>(contents.data() + pos);
    pos += incl;

    auto ip = ipv4_offset(linktype, f, incl);
    if (!ip || *ip + 20 > incl) continue;
    const unsigned char* iph = f + *ip;
    if ((iph[0] >> 4) != 4) continue;
    std::size_t ihl = static_cast<std::size_t>(iph[0] & 0x0f) * 4;
    if (ihl < 20 || *ip + ihl + 8 > incl || iph[9] != 17) continue;
    std::uint16_t frag = be16(iph + 6);
    if ((frag & 0x3fff) != 0) continue;  // fragments are not reassembled
    std::size_t ip_total = be16(iph + 2);
    const unsigned char* udp = iph + ihl;
    std::uint16_t sport = be16(udp), dport = be16(udp + 2);
    if (sport != sip_port && dport != sip_port) continue;
    std::size_t udp_len = be16(udp + 4);
    std::size_t avail = incl - *ip - ihl - 8;
    if (ip_total >= ihl + 8) avail = std::min(avail, ip_total - ihl - 8);
    std::size_t payload_len = udp_len >= 8 ? std::min(avail, udp_len - 8) : avail;
    if (payload_len == 0) continue;

    TraceRecord rec;
    rec.timestamp = Timestamp(static_cast<std::int64_t>(sec) * 1'000'000 + (nanos ? frac / 1000 : frac));
    rec.source = {ipv4_string(iph + 12), sport};
    rec.dest = {ipv4_string(iph + 16), dport};
    rec.direction = dport == sip_port ? Direction::inbound : Direction::outbound;
    rec.payload.assign(reinterpret_cast<const char*>(udp + 8), payload_len);
    if (!out.empty() && rec.timestamp < out.back().timestamp) throw TraceError(index, "timestamps go backwards");
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<TraceRecord> read_trace(const std::filesystem::path& path, TraceFormat format, std::uint16_t sip_port) {
  std::string contents = slurp(path);
  return format == TraceFormat::pcap ? parse_pcap(contents, sip_port) : parse_ndtrace(contents);
}

void write_ndtrace(std::span<const TraceRecord> records, std::ostream& out) {
  out << "#ndtrace v1\n";
  for (const auto& r : records) {
    out << "ts=" << format_timestamp(r.timestamp) << " dir=" << (r.direction == Direction::inbound ? "in" : "out")
        << " src=" << r.source.str() << " dst=" << r.dest.str() << " len=" << r.payload.size() << '\n';
    out.write(r.payload.data(), static_cast<std::streamsize>(r.payload.size()));
    out << '\n';
  }
}

void write_trace(std::span<const TraceRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TraceError(0, "cannot open " + path.string() + " for writing");
  write_ndtrace(records, out);
  out.flush();
  if (!out) throw TraceError(0, "write failed: " + path.string());
}

std::string encode_pcap(std::span<const TraceRecord> records) {
  std::string out;
  put_le32(out, 0xa1b2c3d4);
  put_le16(out, 2);
  put_le16(out, 4);
  put_le32(out, 0);
  put_le32(out, 0);
  put_le32(out, 65535);
  put_le32(out, 1);
  for (const auto& r : records) {
    std::string frame;
    frame.append(12, '\0');  // MACs
    put_be16(frame, 0x0800);
    auto total = static_cast<std::uint16_t>(20 + 8 + r.payload.size());
    frame += static_cast<char>(0x45);
    frame += '\0';
    put_be16(frame, total);
    put_be16(frame, 0);
    put_be16(frame, 0);
    frame += static_cast<char>(64);
    frame += static_cast<char>(17);
    put_be16(frame, 0);
    for (auto b : ipv4_bytes(r.source.host)) frame += static_cast<char>(b);
    for (auto b : ipv4_bytes(r.dest.host)) frame += static_cast<char>(b);
    put_be16(frame, r.source.port);
    put_be16(frame, r.dest.port);
    put_be16(frame, static_cast<std::uint16_t>(8 + r.payload.size()));
    put_be16(frame, 0);
    frame += r.payload;

    put_le32(out, static_cast<std::uint32_t>(r.timestamp.count() / 1'000'000));
    put_le32(out, static_cast<std::uint32_t>(r.timestamp.count() % 1'000'000));
    put_le32(out, static_cast<std::uint32_t>(frame.size()));
    put_le32(out, static_cast<std::uint32_t>(frame.size()));
    out += frame;
  }
  return out;
}

}  // namespace sipwall

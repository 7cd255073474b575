#include "sipwall/trace_gen.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>

namespace sipwall {

namespace {

const Endpoint kCallee{"192.168.1.10", 5060};
const Endpoint kAttacker{"172.16.0.66", 5060};

Endpoint caller_endpoint(std::size_t i) {
  return {"10.0.0." + std::to_string(i % 250 + 1), 5060};
}

class Ids {
 public:
  explicit Ids(std::uint64_t seed) : rng_(seed) {}
  std::string hex() {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng_()));
    return buf;
  }
  std::string tag() { return hex().substr(0, 10); }
  std::string branch() { return "z9hG4bK" + hex(); }

 private:
  std::mt19937_64 rng_;
};

struct Headers {
  std::string via;
  std::string from;
  std::string to;
  std::string call_id;
  std::string cseq;
  std::string contact;
};

std::string render(std::string_view start_line, const Headers& h) {
  std::string out(start_line);
  out += "\r\nVia: " + h.via;
  out += "\r\nMax-Forwards: 70";
  out += "\r\nFrom: " + h.from;
  out += "\r\nTo: " + h.to;
  out += "\r\nCall-ID: " + h.call_id;
  out += "\r\nCSeq: " + h.cseq;
  if (!h.contact.empty()) out += "\r\nContact: " + h.contact;
  out += "\r\nUser-Agent: sipwall-gen/1.0";
  out += "\r\nContent-Length: 0\r\n\r\n";
  return out;
}

std::string via_for(const Endpoint& ep, const std::string& branch) {
  return "SIP/2.0/UDP " + ep.str() + ";branch=" + branch;
}

TraceRecord record(Timestamp ts, Direction dir, const Endpoint& src, const Endpoint& dst, std::string payload) {
  return TraceRecord{ts, dir, src, dst, std::move(payload)};
}

struct Dialog {
  std::string caller;
  std::string callee_uri = "sip:bob@b.example";
  std::string from;
  std::string to_no_tag;
  std::string to;
  std::string call_id;
  Endpoint caller_ep;
};

Dialog new_dialog(std::size_t i, Ids& ids) {
  Dialog d;
  d.caller = "sip:alice" + std::to_string(i) + "@a.example";
  d.from = "<" + d.caller + ">;tag=" + ids.tag();
  d.to_no_tag = "<" + d.callee_uri + ">";
  d.to = d.to_no_tag + ";tag=" + ids.tag();
  d.call_id = ids.hex() + "@a.example";
  d.caller_ep = caller_endpoint(i);
  return d;
}

// INVITE, [100], 180, 200, ACK starting at t0 with 100 ms spacing.
void call_setup(std::vector<TraceRecord>& out, const Dialog& d, Ids& ids, Timestamp t0, bool with_trying,
                std::size_t& step) {
  const std::string branch = ids.branch();
  Headers inv{via_for(d.caller_ep, branch), d.from, d.to_no_tag, d.call_id, "1 INVITE", "<" + d.caller + ">"};
  auto at = [&] { return t0 + std::chrono::milliseconds(100) * static_cast<std::int64_t>(step++); };
  out.push_back(record(at(), Direction::inbound, d.caller_ep, kCallee, render("INVITE " + d.callee_uri + " SIP/2.0", inv)));
  Headers resp = inv;
  resp.contact.clear();
  if (with_trying) out.push_back(record(at(), Direction::outbound, kCallee, d.caller_ep, render("SIP/2.0 100 Trying", resp)));
  resp.to = d.to;
  out.push_back(record(at(), Direction::outbound, kCallee, d.caller_ep, render("SIP/2.0 180 Ringing", resp)));
  resp.contact = "<" + d.callee_uri + ">";
  out.push_back(record(at(), Direction::outbound, kCallee, d.caller_ep, render("SIP/2.0 200 OK", resp)));
  Headers ack{via_for(d.caller_ep, ids.branch()), d.from, d.to, d.call_id, "1 ACK", ""};
  out.push_back(record(at(), Direction::inbound, d.caller_ep, kCallee, render("ACK " + d.callee_uri + " SIP/2.0", ack)));
}

}  // namespace

std::optional<TraceKind> parse_trace_kind(std::string_view text) {
  if (text == "bye-attack") return TraceKind::bye_attack;
  if (text == "invite-flood") return TraceKind::invite_flood;
  if (text == "clean-calls") return TraceKind::clean_calls;
  return std::nullopt;
}

std::vector<TraceRecord> generate_bye_attack(std::size_t calls, std::uint64_t seed) {
  Ids ids(seed);
  std::vector<TraceRecord> out;
  for (std::size_t i = 0; i < calls; ++i) {
    Dialog d = new_dialog(i, ids);
    Timestamp t0 = std::chrono::seconds(2) * static_cast<std::int64_t>(i);
    std::size_t step = 0;
    call_setup(out, d, ids, t0, false, step);
    auto at = [&] { return t0 + std::chrono::milliseconds(100) * static_cast<std::int64_t>(step++); };

    // The attacker impersonates the callee towards the caller.
    Headers forged{via_for(kAttacker, ids.branch()), "<" + d.callee_uri + ">;tag=" + ids.tag(),
                   "<" + d.caller + ">;" + d.from.substr(d.from.find("tag=")), d.call_id, "1 BYE", ""};
    out.push_back(record(at(), Direction::inbound, kAttacker, d.caller_ep, render("BYE " + d.caller + " SIP/2.0", forged)));

    Headers bye{via_for(d.caller_ep, ids.branch()), d.from, d.to, d.call_id, "2 BYE", ""};
    out.push_back(record(at(), Direction::inbound, d.caller_ep, kCallee, render("BYE " + d.callee_uri + " SIP/2.0", bye)));
  }
  return out;
}

std::vector<TraceRecord> generate_invite_flood(std::size_t count, double rate, std::uint64_t seed) {
  if (!(rate > 0) || !std::isfinite(rate)) throw std::invalid_argument("flood rate must be positive");
  Ids ids(seed);
  std::vector<TraceRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Timestamp ts(std::llround(static_cast<double>(i) * 1e6 / rate));
    Headers inv{via_for(kAttacker, ids.branch()), "<sip:flood@evil.example>;tag=" + ids.tag(),
                "<sip:bob@b.example>", ids.hex() + "@evil.example", "1 INVITE", "<sip:flood@evil.example>"};
    out.push_back(record(ts, Direction::inbound, kAttacker, kCallee, render("INVITE sip:bob@b.example SIP/2.0", inv)));
  }
  return out;
}

std::vector<TraceRecord> generate_clean_calls(std::size_t calls, std::uint64_t seed) {
  Ids ids(seed);
  std::vector<TraceRecord> out;
  for (std::size_t i = 0; i < calls; ++i) {
    Dialog d = new_dialog(i, ids);
    Timestamp t0 = std::chrono::seconds(2) * static_cast<std::int64_t>(i);
    std::size_t step = 0;
    call_setup(out, d, ids, t0, true, step);
    auto at = [&] { return t0 + std::chrono::milliseconds(100) * static_cast<std::int64_t>(step++); };
    Headers bye{via_for(d.caller_ep, ids.branch()), d.from, d.to, d.call_id, "2 BYE", ""};
    out.push_back(record(at(), Direction::inbound, d.caller_ep, kCallee, render("BYE " + d.callee_uri + " SIP/2.0", bye)));
    out.push_back(record(at(), Direction::outbound, kCallee, d.caller_ep, render("SIP/2.0 200 OK", bye)));
  }
  return out;
}

std::vector<TraceRecord> generate_trace(const GenParams& p) {
  switch (p.kind) {
    case TraceKind::bye_attack: return generate_bye_attack(p.calls, p.seed);
    case TraceKind::invite_flood: return generate_invite_flood(p.count, p.rate, p.seed);
    case TraceKind::clean_calls: return generate_clean_calls(p.calls, p.seed);
  }
  return {};
}

}  // namespace sipwall

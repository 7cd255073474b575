#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "sipwall/trace_io.hpp"

namespace sipwall {

enum class TraceKind : std::uint8_t { bye_attack, invite_flood, clean_calls };

std::optional<TraceKind> parse_trace_kind(std::string_view text);

struct GenParams {
  TraceKind kind = TraceKind::clean_calls;
  std::size_t calls = 1;     // bye-attack, clean-calls
  std::size_t count = 100;   // invite-flood
  double rate = 10;          // invite-flood, messages per second
  std::uint64_t seed = 1;
};

// Per call: INVITE, 180, 200, ACK, a BYE forged by a third party carrying a
// From the dialog never used, then the caller's genuine BYE.
std::vector<TraceRecord> generate_bye_attack(std::size_t calls, std::uint64_t seed);
// INVITEs with fresh Call-IDs and branches, evenly spaced at `rate`.
std::vector<TraceRecord> generate_invite_flood(std::size_t count, double rate, std::uint64_t seed);
// Complete dialogs: INVITE, 100, 180, 200, ACK, BYE, 200.
std::vector<TraceRecord> generate_clean_calls(std::size_t calls, std::uint64_t seed);

std::vector<TraceRecord> generate_trace(const GenParams& params);

}  // namespace sipwall

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

#include "sipwall/bench.hpp"
#include "sipwall/proxy.hpp"
#include "sipwall/replay.hpp"
#include "sipwall/trace_gen.hpp"
#include "sipwall/trace_io.hpp"

namespace sipwall {

enum class RunMode : std::uint8_t { replay, proxy };

struct RunConfig {
  std::filesystem::path rules;
  RunMode mode = RunMode::replay;
  std::filesystem::path trace;
  std::optional<TraceFormat> format;  // inferred from the extension when unset
  std::uint16_t sip_port = kDefaultSipPort;
  Pacing pacing = Pacing::fast();
  ProxyConfig proxy;
  std::optional<Timestamp> transaction_lifetime;
  std::optional<Timestamp> dialog_lifetime;
  std::optional<Timestamp> global_lifetime;
  std::optional<std::filesystem::path> stats;  // CSV destination; stdout when unset
  std::size_t sweep_every = 256;
};

// Throws std::invalid_argument when mode-required fields are missing or an
// override is not positive.
void validate(const RunConfig& config);

// ".pcap"/".cap" select pcap, anything else ndtrace.
TraceFormat infer_format(const std::filesystem::path& path);

int cmd_run(const RunConfig& config, std::ostream& out, std::ostream& err, const std::atomic<bool>* stop = nullptr);
int cmd_check(const std::filesystem::path& rules, std::ostream& out, std::ostream& err);

struct BenchConfig {
  int scenario = 1;
  Scenario1Params s1;
  Scenario2Params s2;
  std::optional<std::filesystem::path> out;
};
int cmd_bench(const BenchConfig& config, std::ostream& out, std::ostream& err);

struct GenTraceConfig {
  GenParams params;
  std::filesystem::path out;
  std::optional<TraceFormat> format;
};
int cmd_gen_trace(const GenTraceConfig& config, std::ostream& out, std::ostream& err);

}  // namespace sipwall

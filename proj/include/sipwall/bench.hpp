#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "sipwall/replay.hpp"

namespace sipwall {

inline constexpr std::string_view kStatsCsvHeader =
    "rate_offered,rate_achieved,rules,msgs,forwarded,dropped,malformed,p50_us,p90_us,p99_us";

struct BenchReport {
  double offered_rate = 0;
  double achieved_rate = 0;
  std::size_t rules = 0;
  std::size_t msgs = 0;
  std::size_t forwarded = 0;
  std::size_t dropped = 0;
  std::size_t malformed = 0;
  double p50_us = 0;
  double p90_us = 0;
  double p99_us = 0;
  double duration_s = 0;
};

BenchReport summarize(const ReplayReport& replay, std::size_t rules);
// Quantiles from raw latency samples in microseconds.
void fill_quantiles(BenchReport& report, const std::vector<double>& latency_us);

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const BenchReport& report);

struct Scenario1Params {
  double rate_min = 10;
  double rate_max = 500;
  double rate_step = 50;
  double seconds_per_point = 10;
  std::uint64_t seed = 1;
};

struct Scenario2Params {
  double rate = 60;
  std::size_t rules_min = 1;
  std::size_t rules_max = 256;
  std::size_t rules_step = 0;  // 0: double each point
  double seconds_per_point = 10;
  std::uint64_t seed = 1;
};

// Sweep points; the upper bound is always included.
std::vector<double> scenario1_rates(const Scenario1Params& p);
std::vector<std::size_t> scenario2_rule_counts(const Scenario2Params& p);

// k rules: a global INVITE counter declaration, k-2 user-agent regex drop
// rules that never match generated traffic, and a terminal counter drop rule
// whose threshold is never reached.
std::string synthetic_rules(std::size_t k);

// Replays an INVITE flood of rate*seconds messages at a fixed rate.
BenchReport bench_point(std::string_view rules_text, double rate, double seconds, std::uint64_t seed);

using BenchProgress = std::function<void(const BenchReport&)>;
std::vector<BenchReport> run_scenario1(const Scenario1Params& p, const BenchProgress& progress = {});
std::vector<BenchReport> run_scenario2(const Scenario2Params& p, const BenchProgress& progress = {});

}  // namespace sipwall

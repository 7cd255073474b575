#include "sipwall/bench.hpp"

#include <cmath>
#include <cstdio>
#include <memory>
#include <ostream>
#include <stdexcept>

#include "sipwall/rule_dsl.hpp"
#include "sipwall/trace_gen.hpp"

namespace sipwall {

void fill_quantiles(BenchReport& report, const std::vector<double>& latency_us) {
  report.p50_us = quantile(latency_us, 0.50);
  report.p90_us = quantile(latency_us, 0.90);
  report.p99_us = quantile(latency_us, 0.99);
}

BenchReport summarize(const ReplayReport& replay, std::size_t rules) {
  BenchReport r;
  r.offered_rate = replay.offered_rate;
  r.achieved_rate = replay.achieved_rate;
  r.rules = rules;
  r.msgs = replay.verdicts.size();
  r.forwarded = replay.forwarded;
  r.dropped = replay.dropped;
  r.malformed = replay.malformed;
  r.duration_s = replay.duration_s;
  fill_quantiles(r, replay.latency_us);
  return r;
}

void write_csv_header(std::ostream& out) { out << kStatsCsvHeader << '\n'; }

void write_csv_row(std::ostream& out, const BenchReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.3f,%.3f,%zu,%zu,%zu,%zu,%zu,%.3f,%.3f,%.3f\n", r.offered_rate, r.achieved_rate,
                r.rules, r.msgs, r.forwarded, r.dropped, r.malformed, r.p50_us, r.p90_us, r.p99_us);
  out << buf;
}

std::vector<double> scenario1_rates(const Scenario1Params& p) {
  if (!(p.rate_min > 0) || p.rate_max < p.rate_min || !(p.rate_step > 0))
    throw std::invalid_argument("scenario 1 needs 0 < rate-min <= rate-max and rate-step > 0");
  std::vector<double> rates;
  for (double r = p.rate_min; r < p.rate_max - 1e-9; r += p.rate_step) rates.push_back(r);
  rates.push_back(p.rate_max);
  return rates;
}

std::vector<std::size_t> scenario2_rule_counts(const Scenario2Params& p) {
  if (p.rules_min == 0 || p.rules_max < p.rules_min)
    throw std::invalid_argument("scenario 2 needs 1 <= rules-min <= rules-max");
  std::vector<std::size_t> counts;
  for (std::size_t k = p.rules_min; k < p.rules_max; k = p.rules_step ? k + p.rules_step : k * 2) counts.push_back(k);
  counts.push_back(p.rules_max);
  return counts;
}

std::string synthetic_rules(std::size_t k) {
  std::string text = "secsip \"FIELDS:sip.method\" \"^INVITE$\" declare:bench_invites=counter[10;60]@global\n";
  if (k <= 1) return text;
  for (std::size_t i = 0; i + 2 < k; ++i)
    text += "secsiprule \"FIELDS:sip.user_agent\" \"^scanner-" + std::to_string(i) + "/[0-9]+$\" drop\n";
  text += "secsip bench_invites \"@gt 1000000000\" drop\n";
  return text;
}

BenchReport bench_point(std::string_view rules_text, double rate, double seconds, std::uint64_t seed) {
  if (!(rate > 0) || !(seconds > 0)) throw std::invalid_argument("bench point needs positive rate and duration");
  auto program = std::make_shared<const RuleProgram>(compile_text(rules_text));
  Engine engine(program);
  auto count = static_cast<std::size_t>(std::llround(rate * seconds));
  auto trace = generate_invite_flood(count, rate, seed);
  auto rep = replay(trace, engine, Pacing::fixed(rate));
  return summarize(rep, program->rules.size());
}

std::vector<BenchReport> run_scenario1(const Scenario1Params& p, const BenchProgress& progress) {
  std::vector<BenchReport> out;
  for (double rate : scenario1_rates(p)) {
    out.push_back(bench_point("", rate, p.seconds_per_point, p.seed));
    if (progress) progress(out.back());
  }
  return out;
}

std::vector<BenchReport> run_scenario2(const Scenario2Params& p, const BenchProgress& progress) {
  std::vector<BenchReport> out;
  for (std::size_t k : scenario2_rule_counts(p)) {
    out.push_back(bench_point(synthetic_rules(k), p.rate, p.seconds_per_point, p.seed));
    if (progress) progress(out.back());
  }
  return out;
}

}  // namespace sipwall

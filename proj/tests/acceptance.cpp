// Acceptance checks; one PASS/FAIL line per criterion. Exit status is the
// number of failures.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "sipwall/bench.hpp"
#include "sipwall/replay.hpp"
#include "sipwall/state_store.hpp"
#include "test_support.hpp"

using namespace sipwall;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool ok;
  std::string detail;
};

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome bye_attack() {
  auto t0 = Clock::now();
  auto trace = generate_bye_attack(10, 42);
  Engine engine(testsup::program(testsup::rules_file("bye_attack.rules")));
  auto rep = replay(trace, engine, Pacing::fast());
  double secs = since(t0);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    bool forged = i % 6 == 4;
    if ((rep.verdicts[i].decision == Decision::drop) != forged) ++wrong;
  }
  bool ok = trace.size() == 60 && rep.dropped == 10 && rep.forwarded == 50 && wrong == 0 && secs < 5;
  return {ok, fmt("msgs=%zu forwarded=%zu dropped=%zu misplaced=%zu runtime=%.3fs", trace.size(), rep.forwarded,
                  rep.dropped, wrong, secs)};
}

Outcome invite_flood() {
  auto trace = generate_invite_flood(40, 1.0, 42);
  Engine engine(testsup::program(testsup::rules_file("flooding_attack.rules")));
  auto rep = replay(trace, engine, Pacing::fast());
  testsup::LeakyOracle oracle(10, 60'000'000);
  std::size_t mismatches = 0, drops = 0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    bool expect = oracle.increment(trace[i].timestamp.count()) > 15;
    bool got = rep.verdicts[i].decision == Decision::drop;
    drops += got;
    mismatches += expect != got;
  }
  return {mismatches == 0, fmt("msgs=40 dropped=%zu mismatches=%zu", drops, mismatches)};
}

Outcome counter_oracle() {
  std::mt19937_64 rng(424242);
  std::size_t mismatches = 0, ops_total = 0;
  const int timelines = 10000;
  for (int seq = 0; seq < timelines; ++seq) {
    ContainerDescriptor d;
    d.name = "c";
    d.kind = ContainerKind::counter;
    d.scope = ScopeKind::global;
    d.lifetime = kForever;
    d.leak_amount = static_cast<std::int64_t>(rng() % 8);
    std::int64_t interval = 1 + static_cast<std::int64_t>(rng() % 10'000'000);
    d.leak_interval = Timestamp(interval);
    StateStore store({d});
    testsup::LeakyOracle oracle(d.leak_amount, interval);
    std::int64_t t = static_cast<std::int64_t>(rng() % 100'000'000);
    auto& c = store.resolve("c", ScopeKey::global(), Timestamp(t));
    oracle.start(t);
    int ops = 1 + static_cast<int>(rng() % 100);
    for (int k = 0; k < ops; ++k, ++ops_total) {
      // mostly short gaps, sometimes many intervals at once
      std::int64_t gap = rng() % 5 ? static_cast<std::int64_t>(rng() % (interval + 1))
                                   : static_cast<std::int64_t>(rng() % (50 * interval + 1));
      t += gap;
      if (rng() % 3) mismatches += c.counter_increment(Timestamp(t)) != oracle.increment(t);
      else mismatches += c.counter_value(Timestamp(t)) != oracle.read(t);
    }
  }
  return {mismatches == 0, fmt("timelines=%d ops=%zu mismatches=%zu", timelines, ops_total, mismatches)};
}

Outcome scheduler_invariance() {
  std::mt19937_64 rng(31337);
  std::size_t changed = 0, runs = 0;
  for (int i = 0; i < 100; ++i) {
    auto lines = testsup::random_acyclic_rules(rng);
    auto trace = testsup::mixed_trace(rng());
    auto base = testsup::decisions(testsup::run_trace(testsup::program(testsup::join_lines(lines)), trace));
    for (int perm = 0; perm < 3; ++perm) {
      std::shuffle(lines.begin(), lines.end(), rng);
      auto got = testsup::decisions(testsup::run_trace(testsup::program(testsup::join_lines(lines)), trace));
      changed += got != base;
      ++runs;
    }
  }
  auto rules = parse_ruleset(
      "R2: secsip rate \"@eq 80\" drop\nR1: secsip \"FIELDS:sip.method\" \"^INVITE\" declare:rate=counter[10;60]\n");
  auto order = schedule(rules);
  bool reversed_ok = order.size() == 2 && rules[order[0] - 1].name() == "R1" && rules[order[1] - 1].name() == "R2";
  return {changed == 0 && reversed_ok,
          fmt("programs=100 permutations=%zu changed=%zu reversed_example=%s", runs, changed,
              reversed_ok ? "R1,R2" : "wrong")};
}

Outcome latency_no_rules() {
  auto t0 = Clock::now();
  auto r = bench_point("", 500, 10, 1);
  double secs = since(t0);
  bool ok = r.p50_us < 1000 && r.p99_us < 5000 && secs <= 120;
  return {ok, fmt("rate=500 msgs=%zu p50=%.2fus p99=%.2fus achieved=%.1f/s runtime=%.1fs", r.msgs, r.p50_us,
                  r.p99_us, r.achieved_rate, secs)};
}

Outcome throughput_rules() {
  Scenario2Params p;
  auto points = run_scenario2(p);
  bool within = true;
  std::size_t violations = 0;
  std::string curve;
  for (std::size_t i = 0; i < points.size(); ++i) {
    within = within && std::abs(points[i].achieved_rate - p.rate) <= 0.05 * p.rate;
    if (i && points[i].p50_us < points[i - 1].p50_us) ++violations;
    curve += fmt("%s%zu:%.1f/%.2f", i ? " " : "", points[i].rules, points[i].achieved_rate, points[i].p50_us);
  }
  bool reached = !points.empty() && points.back().rules == 256;
  return {within && violations <= 1 && reached,
          fmt("p50_decreases=%zu points(rules:rate/p50us)=[%s]", violations, curve.c_str())};
}

Outcome state_holding() {
  const std::size_t n = 100000;
  const double rate = 10;
  auto trace = generate_invite_flood(n, rate, 7);
  Engine engine(testsup::program(testsup::rules_file("bye_attack.rules")));
  EngineConfig cfg;
  const double lifetime_s = 1800;
  const double sweep_window_s = static_cast<double>(cfg.sweep_every) / rate;
  const auto bound = static_cast<std::size_t>((lifetime_s + sweep_window_s) * rate) + 1;
  std::size_t peak = 0, at_half = 0, at_end = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = trace[i];
    engine.process_message(r.payload, {r.direction, r.source, r.dest, r.timestamp});
    std::size_t live = engine.store().live_instances();
    peak = std::max(peak, live);
    if (i == n / 2) at_half = live;
  }
  at_end = engine.store().live_instances();
  // saturated: the second half adds 50000 messages but no instances
  bool flat = at_end <= at_half + static_cast<std::size_t>(sweep_window_s * rate) + 1;
  return {peak <= bound && flat,
          fmt("msgs=%zu peak_live=%zu bound=%zu live_at_50k=%zu live_at_100k=%zu", n, peak, bound, at_half, at_end)};
}

std::string mutate(std::string s, std::mt19937_64& rng) {
  auto pick = [&](std::size_t k) { return k ? static_cast<std::size_t>(rng() % k) : 0; };
  static const std::string kTokens[] = {"\r\n", ":", ";", "<", ">", "\"", ",", " ", "\t", "\r\n ", "=", "tag",
                                        "SIP/2.0", "\0", "\xff", "@", "\\"};
  int edits = 1 + static_cast<int>(pick(4));
  for (int e = 0; e < edits && !s.empty(); ++e) {
    std::size_t pos = pick(s.size());
    switch (pick(7)) {
      case 0:
        s[pos] = static_cast<char>(rng());
        break;
      case 1:
        s.erase(pos, 1 + pick(8));
        break;
      case 2: {
        const std::string& tok = kTokens[pick(std::size(kTokens))];
        s.insert(pos, tok.empty() ? std::string(1, '\0') : tok);
        break;
      }
      case 3:
        s.resize(pos);
        break;
      case 4: {
        std::size_t len = pick(40);
        s.insert(pos, s.substr(pick(s.size()), len));
        break;
      }
      case 5: {
        std::size_t nl = s.find("\r\n", pos);
        if (nl != std::string::npos) s.erase(nl, 2);
        break;
      }
      default:
        s.insert(pos, std::string(1 + pick(2000), static_cast<char>('a' + pick(26))));
        break;
    }
  }
  return s;
}

Outcome parser_fidelity() {
  // every catalog field registered in the engine's program, so its parser
  // rejects exactly what a full parser rejects
  std::string rules = testsup::rules_file("bye_attack.rules");
  for (std::size_t i = 0; i < kCatalogSize; ++i) {
    const auto& e = catalog_entry(static_cast<CatalogField>(i));
    if (e.pseudo) continue;
    rules += std::string("secsip \"") + (e.ns == Namespace::body ? "BODY:" : "FIELDS:") + std::string(e.path) +
             "\" \"@normalize 65536\"\n";
  }
  Engine engine(testsup::program(rules));
  SipParser full = testsup::full_parser();

  std::vector<TraceRecord> seeds = generate_bye_attack(5, 3);
  auto clean = generate_clean_calls(5, 4);
  seeds.insert(seeds.end(), clean.begin(), clean.end());

  std::mt19937_64 rng(8);
  std::size_t rejected = 0, accepted = 0, offset_violations = 0, fail_open = 0, disagreements = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto& base = seeds[rng() % seeds.size()];
    std::string raw = mutate(base.payload, rng);
    bool parse_ok = true;
    try {
      ParseTree tree = full.parse_message(raw);
      ++accepted;
      for (const auto& n : tree.nodes) {
        bool bad = n.start_offset > n.end_offset || n.end_offset > raw.size();
        if (!bad) {
          bad = testsup::trim(std::string_view(raw).substr(n.start_offset, n.end_offset - n.start_offset)) != n.value;
        }
        if (!bad && n.parent) {
          const ParseNode* p = tree.find(*n.parent);
          bad = !p || n.start_offset < p->start_offset || n.end_offset > p->end_offset;
        }
        offset_violations += bad;
      }
    } catch (const MalformedMessage&) {
      parse_ok = false;
      ++rejected;
    }
    Verdict v = engine.process_message(raw, {base.direction, base.source, base.dest, base.timestamp});
    if (!parse_ok && v.decision == Decision::forward) ++fail_open;
    if (v.malformed && v.decision == Decision::forward) ++fail_open;
    if (v.malformed == parse_ok) ++disagreements;
  }
  return {offset_violations == 0 && fail_open == 0 && disagreements == 0,
          fmt("mutated=10000 accepted=%zu rejected=%zu offset_violations=%zu forwarded_rejects=%zu "
              "parser_disagreements=%zu",
              accepted, rejected, offset_violations, fail_open, disagreements)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  } criteria[] = {
      {"bye-attack defense", bye_attack},
      {"invite-flood defense", invite_flood},
      {"counter oracle equivalence", counter_oracle},
      {"scheduler invariance", scheduler_invariance},
      {"latency without rules", latency_no_rules},
      {"throughput with rules", throughput_rules},
      {"state-holding resistance", state_holding},
      {"parser fidelity", parser_fidelity},
  };
  int failures = 0;
  int idx = 0;
  for (const auto& c : criteria) {
    ++idx;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.ok;
    std::printf("%s %d %s: %s\n", o.ok ? "PASS" : "FAIL", idx, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}

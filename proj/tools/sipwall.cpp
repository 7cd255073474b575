#include <csignal>
#include <iostream>

#include "CLI11.hpp"
#include "sipwall/commands.hpp"

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop.store(true); }

sipwall::Endpoint endpoint_or_throw(const std::string& text, const char* flag) {
  auto ep = sipwall::parse_endpoint(text);
  if (!ep) throw CLI::ValidationError(flag, "expected host:port, got '" + text + "'");
  return *ep;
}

std::optional<sipwall::TraceFormat> format_flag(const std::string& text) {
  if (text.empty()) return std::nullopt;
  return text == "pcap" ? sipwall::TraceFormat::pcap : sipwall::TraceFormat::ndtrace;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sipwall: stateful SIP application firewall"};
  app.require_subcommand(1);

  // run
  sipwall::RunConfig run;
  std::string mode = "replay", pacing = "fast", format, listen, upstream;
  double tr_life = 0, dlg_life = 0, glob_life = 0, rate_limit = 0;
  auto* run_cmd = app.add_subcommand("run", "Inspect a trace or relay live UDP traffic");
  run_cmd->add_option("--rules", run.rules, "Rule file")->required();
  run_cmd->add_option("--mode", mode, "replay or proxy")->check(CLI::IsMember({"replay", "proxy"}));
  run_cmd->add_option("--trace", run.trace, "Trace file (replay)");
  run_cmd->add_option("--format", format, "Trace format")->check(CLI::IsMember({"pcap", "ndtrace"}));
  run_cmd->add_option("--sip-port", run.sip_port, "SIP port used to filter pcap input");
  run_cmd->add_option("--pacing", pacing, "fast, timed or fixed:<rate>");
  run_cmd->add_option("--stats", run.stats, "Stats CSV output (default stdout)");
  run_cmd->add_option("--listen", listen, "Proxy listen host:port");
  run_cmd->add_option("--upstream", upstream, "Proxy upstream host:port");
  run_cmd->add_option("--rate-limit", rate_limit, "Proxy forward rate cap, messages/s");
  run_cmd->add_option("--transaction-lifetime", tr_life, "Seconds");
  run_cmd->add_option("--dialog-lifetime", dlg_life, "Seconds");
  run_cmd->add_option("--global-lifetime", glob_life, "Seconds");
  run_cmd->add_option("--sweep-every", run.sweep_every, "Messages between expiry sweeps");

  // check
  std::filesystem::path check_rules;
  auto* check_cmd = app.add_subcommand("check", "Compile a rule file and print its schedule");
  check_cmd->add_option("--rules", check_rules, "Rule file")->required();

  // bench
  sipwall::BenchConfig bench;
  auto* bench_cmd = app.add_subcommand("bench", "Latency/throughput sweeps");
  bench_cmd->add_option("--scenario", bench.scenario, "1: rate sweep, no rules; 2: rule-count sweep")
      ->required()
      ->check(CLI::Range(1, 2));
  bench_cmd->add_option("--rate-min", bench.s1.rate_min);
  bench_cmd->add_option("--rate-max", bench.s1.rate_max);
  bench_cmd->add_option("--rate-step", bench.s1.rate_step);
  bench_cmd->add_option("--rate", bench.s2.rate, "Scenario 2 fixed rate");
  bench_cmd->add_option("--rules-min", bench.s2.rules_min);
  bench_cmd->add_option("--rules-max", bench.s2.rules_max);
  bench_cmd->add_option("--rules-step", bench.s2.rules_step, "0 doubles the count each point");
  double seconds = 10;
  std::uint64_t bench_seed = 1;
  bench_cmd->add_option("--seconds", seconds, "Duration of each point");
  bench_cmd->add_option("--seed", bench_seed);
  bench_cmd->add_option("--out", bench.out, "CSV output (default stdout)");

  // gen-trace
  sipwall::GenTraceConfig gen;
  std::string kind, gen_format;
  double duration = 0;
  auto* gen_cmd = app.add_subcommand("gen-trace", "Write a deterministic synthetic trace");
  gen_cmd->add_option("--kind", kind, "bye-attack, invite-flood or clean-calls")
      ->required()
      ->check(CLI::IsMember({"bye-attack", "invite-flood", "clean-calls"}));
  gen_cmd->add_option("--seed", gen.params.seed)->required();
  gen_cmd->add_option("--out", gen.out)->required();
  gen_cmd->add_option("--calls", gen.params.calls, "Calls (bye-attack, clean-calls)");
  gen_cmd->add_option("--count", gen.params.count, "INVITEs (invite-flood)");
  gen_cmd->add_option("--rate", gen.params.rate, "INVITEs per second (invite-flood)");
  gen_cmd->add_option("--duration", duration, "Flood duration in seconds; sets count = rate * duration");
  gen_cmd->add_option("--format", gen_format)->check(CLI::IsMember({"pcap", "ndtrace"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      run.mode = mode == "proxy" ? sipwall::RunMode::proxy : sipwall::RunMode::replay;
      run.format = format_flag(format);
      auto p = sipwall::parse_pacing(pacing);
      if (!p) throw CLI::ValidationError("--pacing", "expected fast, timed or fixed:<rate>");
      run.pacing = *p;
      if (!listen.empty()) run.proxy.listen = endpoint_or_throw(listen, "--listen");
      if (!upstream.empty()) run.proxy.upstream = endpoint_or_throw(upstream, "--upstream");
      if (rate_limit != 0) run.proxy.rate_limit = rate_limit;
      auto secs = [](double s) {
        return std::chrono::duration_cast<sipwall::Timestamp>(std::chrono::duration<double>(s));
      };
      if (tr_life != 0) run.transaction_lifetime = secs(tr_life);
      if (dlg_life != 0) run.dialog_lifetime = secs(dlg_life);
      if (glob_life != 0) run.global_lifetime = secs(glob_life);
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      return sipwall::cmd_run(run, std::cout, std::cerr, &g_stop);
    }
    if (*check_cmd) return sipwall::cmd_check(check_rules, std::cout, std::cerr);
    if (*bench_cmd) {
      bench.s1.seconds_per_point = bench.s2.seconds_per_point = seconds;
      bench.s1.seed = bench.s2.seed = bench_seed;
      return sipwall::cmd_bench(bench, std::cout, std::cerr);
    }
    if (*gen_cmd) {
      gen.params.kind = *sipwall::parse_trace_kind(kind);
      if (duration > 0) gen.params.count = static_cast<std::size_t>(std::llround(gen.params.rate * duration));
      gen.format = format_flag(gen_format);
      return sipwall::cmd_gen_trace(gen, std::cout, std::cerr);
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  }
  return 0;
}

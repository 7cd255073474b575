#include "sipwall/commands.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "sipwall/engine.hpp"
#include "sipwall/rule_dsl.hpp"

namespace sipwall {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string join(const std::set<std::string>& items) {
  if (items.empty()) return "-";
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += ',';
    out += s;
  }
  return out;
}

void positive(const std::optional<Timestamp>& t, const char* what) {
  if (t && t->count() <= 0) throw std::invalid_argument(std::string(what) + " must be positive");
}

void emit_stats(const RunConfig& config, const BenchReport& row, std::ostream& out) {
  if (config.stats) {
    std::ofstream f(*config.stats);
    if (!f) throw std::runtime_error("cannot write " + config.stats->string());
    write_csv_header(f);
    write_csv_row(f, row);
  } else {
    write_csv_header(out);
    write_csv_row(out, row);
  }
}

}  // namespace

void validate(const RunConfig& c) {
  if (c.rules.empty()) throw std::invalid_argument("--rules is required");
  if (c.mode == RunMode::replay && c.trace.empty()) throw std::invalid_argument("replay mode needs --trace");
  if (c.mode == RunMode::proxy) {
    if (c.proxy.listen.port == 0 && c.proxy.listen.host.empty()) throw std::invalid_argument("proxy mode needs --listen");
    if (c.proxy.upstream.host.empty() || c.proxy.upstream.port == 0)
      throw std::invalid_argument("proxy mode needs --upstream");
    if (c.proxy.rate_limit && !(*c.proxy.rate_limit > 0)) throw std::invalid_argument("rate limit must be positive");
  }
  positive(c.transaction_lifetime, "transaction lifetime");
  positive(c.dialog_lifetime, "dialog lifetime");
  positive(c.global_lifetime, "global lifetime");
  if (c.sweep_every == 0) throw std::invalid_argument("sweep period must be positive");
}

TraceFormat infer_format(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  return ext == ".pcap" || ext == ".cap" ? TraceFormat::pcap : TraceFormat::ndtrace;
}

int cmd_run(const RunConfig& config, std::ostream& out, std::ostream& err, const std::atomic<bool>* stop) {
  std::shared_ptr<const RuleProgram> program;
  EngineConfig engine_config;
  try {
    validate(config);
    CompileOptions opts;
    if (config.transaction_lifetime) opts.transaction_lifetime = *config.transaction_lifetime;
    if (config.dialog_lifetime) opts.dialog_lifetime = *config.dialog_lifetime;
    if (config.global_lifetime) opts.global_lifetime = *config.global_lifetime;
    program = std::make_shared<const RuleProgram>(compile_text(read_file(config.rules), opts));
    engine_config.sweep_every = config.sweep_every;
    engine_config.transaction_lifetime = opts.transaction_lifetime;
  } catch (const CompileError& e) {
    err << config.rules.string() << ':' << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "sipwall: " << e.what() << '\n';
    return 2;
  }

  Engine engine(program, engine_config);
  try {
    BenchReport row;
    if (config.mode == RunMode::replay) {
      auto records = read_trace(config.trace, config.format.value_or(infer_format(config.trace)), config.sip_port);
      row = summarize(replay(records, engine, config.pacing), program->rules.size());
    } else {
      std::atomic<bool> never{false};
      UdpProxy proxy(config.proxy, engine);
      err << "sipwall: relaying " << proxy.local_endpoint().str() << " -> " << config.proxy.upstream.str() << '\n';
      ProxyReport rep = proxy.run(stop ? *stop : never);
      row.rules = program->rules.size();
      row.msgs = rep.received;
      row.forwarded = rep.forwarded;
      row.dropped = rep.dropped;
      row.malformed = rep.malformed;
      fill_quantiles(row, rep.latency_us);
    }
    emit_stats(config, row, out);
  } catch (const std::exception& e) {
    err << "sipwall: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int cmd_check(const std::filesystem::path& rules, std::ostream& out, std::ostream& err) {
  try {
    RuleProgram program = compile_text(read_file(rules));
    out << "schedule:\n";
    std::size_t pos = 1;
    for (std::size_t id : program.schedule) {
      const Rule& r = program.rules[id - 1];
      out << "  " << pos++ << ". " << r.name() << " (line " << r.line << ") declares=" << join(r.declares)
          << " reads=" << join(r.reads) << (r.disruptive ? " disruptive" : "") << '\n';
      out << "     " << format_rule(r) << '\n';
    }
    out << "objects:\n";
    for (const auto& o : program.objects)
      out << "  " << o.name << ' ' << to_string(o.kind) << " @" << to_string(o.scope) << '\n';
    out << "fields:\n";
    for (const auto& f : program.registered_fields) out << "  " << f.str() << '\n';
  } catch (const CompileError& e) {
    err << rules.string() << ':' << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "sipwall: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

int cmd_bench(const BenchConfig& config, std::ostream& out, std::ostream& err) {
  try {
    std::ofstream file;
    std::ostream* dst = &out;
    if (config.out) {
      file.open(*config.out);
      if (!file) throw std::runtime_error("cannot write " + config.out->string());
      dst = &file;
    }
    write_csv_header(*dst);
    auto progress = [&](const BenchReport& r) {
      write_csv_row(*dst, r);
      dst->flush();
    };
    if (config.scenario == 1) run_scenario1(config.s1, progress);
    else if (config.scenario == 2) run_scenario2(config.s2, progress);
    else throw std::invalid_argument("scenario must be 1 or 2");
  } catch (const std::exception& e) {
    err << "sipwall: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

int cmd_gen_trace(const GenTraceConfig& config, std::ostream& out, std::ostream& err) {
  try {
    if (config.out.empty()) throw std::invalid_argument("--out is required");
    auto records = generate_trace(config.params);
    TraceFormat fmt = config.format.value_or(infer_format(config.out));
    if (fmt == TraceFormat::pcap) {
      std::ofstream f(config.out, std::ios::binary);
      if (!f) throw std::runtime_error("cannot write " + config.out.string());
      f << encode_pcap(records);
    } else {
      write_trace(records, config.out);
    }
    out << records.size() << " records written to " << config.out.string() << '\n';
  } catch (const std::exception& e) {
    err << "sipwall: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace sipwall

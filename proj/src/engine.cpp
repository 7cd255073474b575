#include "sipwall/engine.hpp"

#include <algorithm>
#include <bit>

#include "text_util.hpp"

namespace sipwall {

std::optional<Endpoint> parse_endpoint(std::string_view text) {
  auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0) return std::nullopt;
  auto port = detail::parse_int(text.substr(colon + 1));
  if (!port || *port < 0 || *port > 65535) return std::nullopt;
  std::string_view host = text.substr(0, colon);
  if (std::any_of(host.begin(), host.end(), detail::is_ws)) return std::nullopt;
  return Endpoint{std::string(host), static_cast<std::uint16_t>(*port)};
}

void LatencyHistogram::add(std::chrono::nanoseconds d) {
  auto us = static_cast<std::uint64_t>(std::max<std::int64_t>(0, d.count()) / 1000);
  std::size_t bucket = us == 0 ? 0 : static_cast<std::size_t>(std::bit_width(us));
  ++buckets[std::min(bucket, kBuckets - 1)];
}

std::uint64_t LatencyHistogram::total() const {
  std::uint64_t n = 0;
  for (auto b : buckets) n += b;
  return n;
}

Engine::Engine(std::shared_ptr<const RuleProgram> program, EngineConfig config)
    : program_(std::move(program)),
      config_(config),
      store_(program_->objects),
      tracker_(config.transaction_lifetime) {
  for (auto id : program_->schedule) ordered_.push_back(&program_->compiled.at(id - 1));
  for (const auto& d : program_->objects) stats_.live_instances[d.name] = 0;
}

namespace {

bool compare(TestOp op, std::int64_t lhs, std::int64_t rhs) {
  switch (op) {
    case TestOp::eq: return lhs == rhs;
    case TestOp::gt: return lhs > rhs;
    case TestOp::lt: return lhs < rhs;
    case TestOp::ge: return lhs >= rhs;
    case TestOp::le: return lhs <= rhs;
    default: return false;
  }
}

bool phase_applies(Phase phase, const std::optional<TransactionClass>& cls) {
  switch (phase) {
    case Phase::any: return true;
    case Phase::invite: return cls == TransactionClass::invite;
    case Phase::non_invite: return cls == TransactionClass::non_invite;
  }
  return false;
}

}  // namespace

std::optional<ScopeKey> Engine::scope_key(std::size_t object, const MessageContext& ctx) const {
  switch (store_.descriptors()[object].scope) {
    case ScopeKind::global: return ScopeKey::global();
    case ScopeKind::dialog:
      if (ctx.dialog_key) return ScopeKey::dialog(*ctx.dialog_key);
      return std::nullopt;
    case ScopeKind::transaction:
      if (ctx.transaction_key) return ScopeKey::transaction(*ctx.transaction_key);
      return std::nullopt;
  }
  return std::nullopt;
}

bool Engine::evaluate_clause(const CompiledClause& clause, const MessageContext& ctx) const {
  if (clause.op == TestOp::normalize) return true;
  const Timestamp now = ctx.meta.arrival;
  bool result = false;

  if (clause.target == CompiledClause::Target::object) {
    std::int64_t value = 0;
    if (auto key = scope_key(clause.object, ctx)) {
      if (const auto* inst = store_.find(clause.object, *key, now)) value = inst->size(now);
    }
    result = clause.op == TestOp::exists ? value > 0 : compare(clause.op, value, clause.operand);
    return clause.negated ? !result : result;
  }

  std::optional<std::string_view> value;
  if (clause.target == CompiledClause::Target::pseudo_src_addr) {
    if (!ctx.meta.source.host.empty()) value = ctx.meta.source.host;
  } else if (const auto* node = ctx.tree.find(clause.field)) {
    value = node->value;
  }
  if (value && clause.value_cap) value = normalize_value(*value, clause.value_cap);

  if (value) {
    switch (clause.op) {
      case TestOp::exists: result = true; break;
      case TestOp::regex: result = std::regex_search(value->begin(), value->end(), *clause.regex); break;
      case TestOp::in: {
        auto key = scope_key(clause.object, ctx);
        const auto* inst = key ? store_.find(clause.object, *key, now) : nullptr;
        result = inst && inst->contains(*value);
        break;
      }
      case TestOp::normalize: result = true; break;
      default: {
        auto n = detail::parse_int(*value);
        result = n && compare(clause.op, *n, clause.operand);
      }
    }
  }
  return clause.negated ? !result : result;
}

void Engine::run_declaration(const CompiledAction& action, const MessageContext& ctx) {
  auto key = scope_key(action.object, ctx);
  if (!key) return;
  const Timestamp now = ctx.meta.arrival;
  if (action.kind == ActionKind::counter_decl) {
    store_.resolve(action.object, *key, now).counter_increment(now);
    return;
  }
  std::optional<std::string_view> value;
  if (action.source_is_src_addr) {
    if (!ctx.meta.source.host.empty()) value = ctx.meta.source.host;
  } else if (const auto* node = ctx.tree.find(*action.source)) {
    value = node->value;
  }
  if (!value) return;
  store_.resolve(action.object, *key, now).insert(*value, now);
}

Verdict Engine::evaluate(const ParseTree& tree, const MessageMeta& meta) {
  MessageContext ctx{tree, extract_dialog_key(tree), extract_transaction_key(tree), std::nullopt, meta};
  if (ctx.transaction_key) {
    const auto& rec = tracker_.update(*ctx.transaction_key, tree.message_kind, tree.status_code.value_or(0),
                                      meta.arrival);
    ctx.transaction_class = rec.cls;
  }

  Verdict v;
  v.decision = Decision::forward;
  for (const CompiledRule* rule : ordered_) {
    if (!phase_applies(rule->phase, ctx.transaction_class)) continue;
    bool matched = true;
    for (const auto& c : rule->clauses) {
      if (!evaluate_clause(c, ctx)) {
        matched = false;
        break;
      }
    }
    if (!matched) continue;
    v.matched_rules.push_back(rule->rule_id);
    bool drop = false;
    for (const auto& a : rule->actions) {
      if (a.kind == ActionKind::drop) drop = true;
      else if (a.kind != ActionKind::forward) run_declaration(a, ctx);
    }
    if (drop) {
      v.decision = Decision::drop;
      v.dropping_rule = rule->rule_id;
      break;
    }
  }
  return v;
}

Verdict Engine::process_message(std::string_view raw, const MessageMeta& meta) {
  const auto started = std::chrono::steady_clock::now();
  Verdict v;
  try {
    std::optional<ParseTree> tree;
    try {
      tree = program_->parser.parse_message(raw);
    } catch (const MalformedMessage& e) {
      v.decision = Decision::drop;
      v.malformed = true;
      v.reason = e.what();
    }
    if (tree) v = evaluate(*tree, meta);
  } catch (const std::exception& e) {
    v = Verdict{};
    v.decision = Decision::drop;
    v.internal_error = true;
    v.reason = e.what();
  } catch (...) {
    v = Verdict{};
    v.decision = Decision::drop;
    v.internal_error = true;
    v.reason = "unknown internal error";
  }

  if (++since_sweep_ >= config_.sweep_every) sweep(meta.arrival);
  v.processing_time = std::chrono::steady_clock::now() - started;
  publish(v);
  return v;
}

void Engine::sweep(Timestamp now) {
  since_sweep_ = 0;
  store_.expire(now);
  tracker_.expire(now);
}

void Engine::finish(Timestamp now) {
  sweep(now);
  std::lock_guard lock(stats_mutex_);
  for (std::size_t i = 0; i < store_.descriptors().size(); ++i)
    stats_.live_instances[store_.descriptors()[i].name] = store_.live_instances(i);
  stats_.live_transactions = tracker_.live();
}

void Engine::publish(const Verdict& v) {
  std::lock_guard lock(stats_mutex_);
  ++stats_.processed;
  if (v.malformed) ++stats_.malformed;
  else if (v.decision == Decision::drop) ++stats_.dropped;
  else ++stats_.forwarded;
  if (v.internal_error) ++stats_.internal_errors;
  stats_.latency.add(v.processing_time);
  for (std::size_t i = 0; i < store_.descriptors().size(); ++i)
    stats_.live_instances[store_.descriptors()[i].name] = store_.live_instances(i);
  stats_.live_transactions = tracker_.live();
}

EngineStats Engine::stats_snapshot() const {
  std::lock_guard lock(stats_mutex_);
  return stats_;
}

}  // namespace sipwall

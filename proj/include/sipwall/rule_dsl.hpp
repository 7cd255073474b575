#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sipwall/field_catalog.hpp"
#include "sipwall/sip_parser.hpp"
#include "sipwall/state_store.hpp"

namespace sipwall {

// Rule compilation failure. line() is the 1-based source line, 0 when the
// error is not tied to a single line.
class CompileError : public std::runtime_error {
 public:
  CompileError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class Directive : std::uint8_t { secsip, secsip_rule, secsip_action };
enum class Phase : std::uint8_t { any, invite, non_invite };

enum class TestOp : std::uint8_t { exists, regex, eq, gt, lt, ge, le, in, normalize };

struct ObjectRef {
  std::string name;
  auto operator<=>(const ObjectRef&) const = default;
};

// One pre-condition of a rule.
struct Clause {
  std::variant<FieldPath, ObjectRef> target;
  bool negated = false;
  TestOp op = TestOp::exists;
  std::string pattern;        // regex source, or container name for @in
  std::int64_t operand = 0;   // comparisons and @normalize

  bool is_field() const { return std::holds_alternative<FieldPath>(target); }
  bool operator==(const Clause&) const = default;
};

enum class ActionKind : std::uint8_t { drop, forward, hold_decl, counter_decl };

struct Action {
  ActionKind kind = ActionKind::drop;
  std::string object;
  ContainerKind container = ContainerKind::set;
  std::optional<FieldPath> source;
  std::int64_t leak_amount = 0;
  std::int64_t leak_interval_s = 1;
  std::optional<ScopeKind> scope;  // explicit @dialog/@transaction/@global

  bool declares() const { return kind == ActionKind::hold_decl || kind == ActionKind::counter_decl; }
  bool operator==(const Action&) const = default;
};

struct Rule {
  std::size_t rule_id = 0;  // 1-based source ordinal
  std::size_t line = 0;
  std::string label;  // optional "R1:" prefix
  Directive directive = Directive::secsip;
  Phase phase = Phase::any;
  std::vector<Clause> clauses;
  std::vector<Action> actions;
  std::set<std::string> declares;
  std::set<std::string> reads;
  bool disruptive = false;

  bool operator==(const Rule&) const = default;
  // The label when present, otherwise "R<rule_id>".
  std::string name() const { return label.empty() ? "R" + std::to_string(rule_id) : label; }
};

std::vector<Rule> parse_ruleset(std::string_view text);
// Single rule line; throws CompileError on bad syntax.
Rule parse_rule(std::string_view line, std::size_t line_no = 1, std::size_t rule_id = 1);
// Canonical one-line rendering; parse_rule(format_rule(r)) == r.
std::string format_rule(const Rule& rule);

struct CompileOptions {
  Timestamp transaction_lifetime = std::chrono::seconds(32);
  Timestamp dialog_lifetime = std::chrono::seconds(1800);
  Timestamp global_lifetime = kForever;
  std::size_t default_max_value_len = 1024;
};

struct CompiledClause {
  enum class Target : std::uint8_t { field, pseudo_src_addr, object };
  Target target = Target::field;
  FieldId field = 0;
  std::size_t object = 0;      // object_ref target, or @in container
  bool negated = false;
  TestOp op = TestOp::exists;
  std::int64_t operand = 0;
  std::size_t value_cap = 0;   // 0: field value used as-is
  std::shared_ptr<const std::regex> regex;
};

struct CompiledAction {
  ActionKind kind = ActionKind::drop;
  std::size_t object = 0;
  std::optional<FieldId> source;
  bool source_is_src_addr = false;
};

struct CompiledRule {
  std::size_t rule_id = 0;
  Phase phase = Phase::any;
  bool disruptive = false;
  std::vector<CompiledClause> clauses;
  std::vector<CompiledAction> actions;
};

// Output of compile(): immutable and shareable across threads.
struct RuleProgram {
  std::vector<Rule> rules;
  std::vector<std::size_t> schedule;  // rule ids in evaluation order
  std::vector<ContainerDescriptor> objects;
  std::map<std::string, std::size_t> object_index;
  std::set<FieldPath> registered_fields;
  SipParser parser;
  std::vector<CompiledRule> compiled;  // indexed by rule_id - 1

  const ContainerDescriptor* declared(std::string_view name) const;
};

RuleProgram compile(std::vector<Rule> rules, const CompileOptions& options = {});
inline RuleProgram compile_text(std::string_view text, const CompileOptions& options = {}) {
  return compile(parse_ruleset(text), options);
}

// Dependency order: every declarer of X before every reader of X; among
// unconstrained rules non-disruptive first, then source order. Throws
// CompileError naming the cycle if the declare/read graph is cyclic.
std::vector<std::size_t> schedule(std::span<const Rule> rules);
inline std::vector<std::size_t> schedule(const RuleProgram& program) { return schedule(program.rules); }

std::string_view to_string(Directive d);
std::string_view to_string(Phase p);

}  // namespace sipwall

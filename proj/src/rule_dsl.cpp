#include "sipwall/rule_dsl.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

#include "text_util.hpp"

namespace sipwall {

namespace {

using detail::iequals;
using detail::istarts_with;

struct Token {
  std::string text;
  bool quoted = false;
};

std::vector<Token> tokenize(std::string_view line, std::size_t line_no) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && detail::is_ws(line[i])) ++i;
    if (i >= line.size() || line[i] == '#') break;
    if (line[i] == '"') {
      std::string text;
      std::size_t j = i + 1;
      bool closed = false;
      for (; j < line.size(); ++j) {
        if (line[j] == '\\' && j + 1 < line.size() && line[j + 1] == '"') {
          text += '"';
          ++j;
        } else if (line[j] == '"') {
          closed = true;
          break;
        } else {
          text += line[j];
        }
      }
      if (!closed) throw CompileError(line_no, "unbalanced quotes");
      out.push_back({std::move(text), true});
      i = j + 1;
    } else {
      std::size_t j = i;
      while (j < line.size() && !detail::is_ws(line[j])) {
        if (line[j] == '"') throw CompileError(line_no, "unbalanced quotes");
        ++j;
      }
      out.push_back({std::string(line.substr(i, j - i)), false});
      i = j;
    }
  }
  return out;
}

bool valid_object_name(std::string_view name) {
  if (name.empty()) return false;
  std::size_t start = 0;
  while (true) {
    std::size_t dot = name.find('.', start);
    std::string_view seg = name.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
    if (seg.empty()) return false;
    auto c0 = static_cast<unsigned char>(seg.front());
    if (!(std::isalpha(c0) || c0 == '_')) return false;
    for (unsigned char c : seg)
      if (!(std::isalnum(c) || c == '_')) return false;
    if (dot == std::string_view::npos) return true;
    start = dot + 1;
  }
}

std::optional<std::string> parent_of(std::string_view name) {
  auto dot = name.rfind('.');
  if (dot == std::string_view::npos) return std::nullopt;
  return std::string(name.substr(0, dot));
}

bool is_action_token(const Token& t) {
  if (t.quoted) return false;
  return iequals(t.text, "drop") || iequals(t.text, "forward") || istarts_with(t.text, "hold:") ||
         istarts_with(t.text, "declare:");
}

bool has_backreference(std::string_view pattern) {
  for (std::size_t i = 0; i + 1 < pattern.size(); ++i) {
    if (pattern[i] != '\\') continue;
    char n = pattern[i + 1];
    if ((n >= '1' && n <= '9') || n == 'k') return true;
    ++i;
  }
  return false;
}

std::shared_ptr<const std::regex> build_regex(const std::string& pattern, std::size_t line_no) {
  if (has_backreference(pattern)) throw CompileError(line_no, "backreferences are not supported: " + pattern);
  try {
    return std::make_shared<const std::regex>(pattern, std::regex::ECMAScript | std::regex::optimize);
  } catch (const std::regex_error& e) {
    throw CompileError(line_no, "bad regex \"" + pattern + "\": " + e.what());
  }
}

void parse_test(std::string_view text, Clause& clause, std::size_t line_no) {
  if (!text.empty() && text.front() == '!') {
    clause.negated = true;
    text.remove_prefix(1);
  }
  if (text.empty()) {
    clause.op = TestOp::exists;
    return;
  }
  if (text.front() != '@') {
    clause.op = TestOp::regex;
    clause.pattern = std::string(text);
    build_regex(clause.pattern, line_no);
    return;
  }
  text.remove_prefix(1);
  std::size_t sp = 0;
  while (sp < text.size() && !detail::is_ws(text[sp])) ++sp;
  std::string op = detail::to_lower(text.substr(0, sp));
  std::string_view arg = detail::trim(text.substr(sp));

  static const std::map<std::string, TestOp> kOps = {
      {"eq", TestOp::eq}, {"gt", TestOp::gt}, {"lt", TestOp::lt}, {"ge", TestOp::ge},
      {"le", TestOp::le}, {"in", TestOp::in}, {"normalize", TestOp::normalize},
  };
  auto it = kOps.find(op);
  if (it == kOps.end()) throw CompileError(line_no, "unknown operator @" + op);
  clause.op = it->second;
  if (clause.op == TestOp::in) {
    if (!valid_object_name(arg)) throw CompileError(line_no, "@in needs a container name");
    clause.pattern = std::string(arg);
    return;
  }
  auto n = detail::parse_int(arg);
  if (!n) throw CompileError(line_no, "@" + op + " needs an integer operand");
  clause.operand = *n;
  if (clause.op == TestOp::normalize && *n < 1) throw CompileError(line_no, "@normalize needs a length >= 1");
}

std::optional<ScopeKind> parse_scope_suffix(std::string_view suffix, std::size_t line_no) {
  if (suffix.empty()) return std::nullopt;
  if (iequals(suffix, "@dialog")) return ScopeKind::dialog;
  if (iequals(suffix, "@transaction")) return ScopeKind::transaction;
  if (iequals(suffix, "@global")) return ScopeKind::global;
  throw CompileError(line_no, "malformed container spec: unknown scope " + std::string(suffix));
}

Action parse_action(const Token& tok, std::size_t line_no) {
  Action a;
  std::string_view t = tok.text;
  if (iequals(t, "drop")) {
    a.kind = ActionKind::drop;
    return a;
  }
  if (iequals(t, "forward")) {
    a.kind = ActionKind::forward;
    return a;
  }
  bool hold = istarts_with(t, "hold:");
  t.remove_prefix(hold ? 5 : 8);
  auto bad = [&](const std::string& why) {
    return CompileError(line_no, "malformed container spec '" + tok.text + "': " + why);
  };
  auto eq = t.find('=');
  if (eq == std::string_view::npos) throw bad("missing '='");
  a.object = std::string(t.substr(0, eq));
  if (!valid_object_name(a.object)) throw bad("bad object name");
  std::string_view spec = t.substr(eq + 1);
  auto open = spec.find('[');
  auto close = spec.rfind(']');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) throw bad("missing [...]");
  std::string kind = detail::to_lower(spec.substr(0, open));
  std::string_view inner = spec.substr(open + 1, close - open - 1);
  a.scope = parse_scope_suffix(spec.substr(close + 1), line_no);

  if (hold) {
    a.kind = ActionKind::hold_decl;
    if (kind == "set") a.container = ContainerKind::set;
    else if (kind == "list") a.container = ContainerKind::list;
    else if (kind == "bag") a.container = ContainerKind::bag;
    else throw bad("hold needs set, list or bag");
    try {
      a.source = parse_field_path(inner);
    } catch (const std::invalid_argument& e) {
      throw bad(e.what());
    }
  } else {
    a.kind = ActionKind::counter_decl;
    a.container = ContainerKind::counter;
    if (kind != "counter") throw bad("declare needs counter[amount;interval]");
    auto semi = inner.find(';');
    if (semi == std::string_view::npos) throw bad("counter needs [amount;interval]");
    auto amount = detail::parse_int(inner.substr(0, semi));
    auto interval = detail::parse_int(inner.substr(semi + 1));
    if (!amount || *amount < 0) throw bad("leak amount must be an integer >= 0");
    if (!interval || *interval < 1) throw bad("leak interval must be an integer >= 1");
    a.leak_amount = *amount;
    a.leak_interval_s = *interval;
  }
  return a;
}

void derive_sets(Rule& rule) {
  rule.declares.clear();
  rule.reads.clear();
  rule.disruptive = false;
  for (const auto& a : rule.actions) {
    if (a.declares()) {
      if (!rule.declares.insert(a.object).second)
        throw CompileError(rule.line, "object " + a.object + " declared twice");
    }
    if (a.kind == ActionKind::drop) rule.disruptive = true;
  }
  for (const auto& c : rule.clauses) {
    if (const auto* o = std::get_if<ObjectRef>(&c.target)) rule.reads.insert(o->name);
    if (c.op == TestOp::in) rule.reads.insert(c.pattern);
  }
  for (const auto& name : rule.declares) {
    auto overlap = rule.reads.find(name);
    if (overlap != rule.reads.end())
      throw CompileError(rule.line, "rule both updates and tests object " + name);
  }
  for (const auto& name : rule.declares) {
    if (auto parent = parent_of(name); parent && !rule.declares.count(*parent)) rule.reads.insert(*parent);
  }
}

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string_view to_string(Directive d) {
  switch (d) {
    case Directive::secsip: return "SecSip";
    case Directive::secsip_rule: return "SecSipRule";
    case Directive::secsip_action: return "SecSipAction";
  }
  return "?";
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::any: return "any";
    case Phase::invite: return "invite";
    case Phase::non_invite: return "non-invite";
  }
  return "?";
}

Rule parse_rule(std::string_view line, std::size_t line_no, std::size_t rule_id) {
  auto tokens = tokenize(line, line_no);
  if (tokens.empty()) throw CompileError(line_no, "empty rule");
  Rule rule;
  rule.rule_id = rule_id;
  rule.line = line_no;

  std::size_t first = 0;
  if (!tokens[0].quoted && tokens[0].text.size() > 1 && tokens[0].text.back() == ':') {
    std::string_view label(tokens[0].text);
    label.remove_suffix(1);
    if (!valid_object_name(label) || label.find('.') != std::string_view::npos)
      throw CompileError(line_no, "bad rule label " + tokens[0].text);
    rule.label = std::string(label);
    first = 1;
    if (tokens.size() == 1) throw CompileError(line_no, "label without a rule");
  }
  const Token& dir = tokens[first];
  if (dir.quoted) throw CompileError(line_no, "unknown directive " + dir.text);
  if (iequals(dir.text, "secsip")) rule.directive = Directive::secsip;
  else if (iequals(dir.text, "secsiprule")) rule.directive = Directive::secsip_rule;
  else if (iequals(dir.text, "secsipaction")) rule.directive = Directive::secsip_action;
  else throw CompileError(line_no, "unknown directive " + dir.text);

  std::size_t i = first + 1;
  if (i < tokens.size() && !tokens[i].quoted && istarts_with(tokens[i].text, "phase:")) {
    std::string p = detail::to_lower(std::string_view(tokens[i].text).substr(6));
    if (p == "any") rule.phase = Phase::any;
    else if (p == "invite") rule.phase = Phase::invite;
    else if (p == "non-invite") rule.phase = Phase::non_invite;
    else throw CompileError(line_no, "unknown phase " + p);
    ++i;
  }

  while (i < tokens.size() && !is_action_token(tokens[i])) {
    const Token& target = tokens[i++];
    if (!target.quoted && target.text == "&&") throw CompileError(line_no, "'&&' without a preceding clause");
    Clause clause;
    if (looks_like_field_path(target.text)) {
      try {
        clause.target = parse_field_path(target.text);
      } catch (const std::invalid_argument& e) {
        throw CompileError(line_no, e.what());
      }
    } else if (valid_object_name(target.text)) {
      clause.target = ObjectRef{target.text};
    } else {
      throw CompileError(line_no, "bad clause target '" + target.text + "'");
    }
    if (i < tokens.size() && tokens[i].quoted) parse_test(tokens[i++].text, clause, line_no);
    rule.clauses.push_back(std::move(clause));
    if (i < tokens.size() && !tokens[i].quoted && tokens[i].text == "&&") {
      ++i;
      if (i >= tokens.size() || is_action_token(tokens[i])) throw CompileError(line_no, "'&&' must be followed by a clause");
      continue;
    }
    if (i < tokens.size() && !is_action_token(tokens[i]))
      throw CompileError(line_no, "expected '&&' or an action, got '" + tokens[i].text + "'");
  }
  for (; i < tokens.size(); ++i) {
    if (!is_action_token(tokens[i])) throw CompileError(line_no, "expected an action, got '" + tokens[i].text + "'");
    rule.actions.push_back(parse_action(tokens[i], line_no));
  }

  for (const auto& c : rule.clauses) {
    bool field = c.is_field();
    if (!field && (c.op == TestOp::regex || c.op == TestOp::in || c.op == TestOp::normalize))
      throw CompileError(line_no, "operator needs a field target, got object " + std::get<ObjectRef>(c.target).name);
    if (c.op == TestOp::normalize && c.negated) throw CompileError(line_no, "@normalize cannot be negated");
  }
  bool has_decl = std::any_of(rule.actions.begin(), rule.actions.end(), [](const Action& a) { return a.declares(); });
  bool has_normalize =
      std::any_of(rule.clauses.begin(), rule.clauses.end(), [](const Clause& c) { return c.op == TestOp::normalize; });
  if (rule.clauses.empty() && !has_decl) throw CompileError(line_no, "a rule without clauses must declare an object");
  if (rule.actions.empty() && !has_normalize) throw CompileError(line_no, "rule has no actions");

  derive_sets(rule);
  return rule;
}

std::vector<Rule> parse_ruleset(std::string_view text) {
  std::vector<Rule> rules;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    std::string_view trimmed = detail::trim(line);
    if (!trimmed.empty() && trimmed.front() != '#') rules.push_back(parse_rule(trimmed, line_no, rules.size() + 1));
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return rules;
}

std::string format_rule(const Rule& rule) {
  std::string out = rule.label.empty() ? "" : rule.label + ": ";
  out += to_string(rule.directive);
  if (rule.phase != Phase::any) out += " phase:" + std::string(to_string(rule.phase));
  for (std::size_t i = 0; i < rule.clauses.size(); ++i) {
    const auto& c = rule.clauses[i];
    if (i) out += " &&";
    out += ' ';
    if (const auto* f = std::get_if<FieldPath>(&c.target)) out += quote(f->str());
    else out += std::get<ObjectRef>(c.target).name;

    std::string test = c.negated ? "!" : "";
    switch (c.op) {
      case TestOp::exists: break;
      case TestOp::regex: test += c.pattern; break;
      case TestOp::eq: test += "@eq " + std::to_string(c.operand); break;
      case TestOp::gt: test += "@gt " + std::to_string(c.operand); break;
      case TestOp::lt: test += "@lt " + std::to_string(c.operand); break;
      case TestOp::ge: test += "@ge " + std::to_string(c.operand); break;
      case TestOp::le: test += "@le " + std::to_string(c.operand); break;
      case TestOp::in: test += "@in " + c.pattern; break;
      case TestOp::normalize: test += "@normalize " + std::to_string(c.operand); break;
    }
    if (!test.empty()) out += ' ' + quote(test);
  }
  for (const auto& a : rule.actions) {
    out += ' ';
    switch (a.kind) {
      case ActionKind::drop: out += "drop"; break;
      case ActionKind::forward: out += "forward"; break;
      case ActionKind::hold_decl:
        out += "hold:" + a.object + "=" + std::string(to_string(a.container)) + "[" + a.source->str() + "]";
        break;
      case ActionKind::counter_decl:
        out += "declare:" + a.object + "=counter[" + std::to_string(a.leak_amount) + ";" +
               std::to_string(a.leak_interval_s) + "]";
        break;
    }
    if (a.scope) out += "@" + std::string(to_string(*a.scope));
  }
  return out;
}

std::vector<std::size_t> schedule(std::span<const Rule> rules) {
  const std::size_t n = rules.size();
  std::map<std::string, std::size_t> declarer;
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& name : rules[i].declares) declarer.emplace(name, i);

  std::vector<std::vector<std::size_t>> succ(n);
  std::vector<std::size_t> indegree(n, 0);
  for (std::size_t r = 0; r < n; ++r) {
    for (const auto& name : rules[r].reads) {
      auto it = declarer.find(name);
      if (it == declarer.end() || it->second == r) continue;
      succ[it->second].push_back(r);
      ++indegree[r];
    }
  }

  // ready rules ordered by (disruptive, source position)
  std::set<std::pair<bool, std::size_t>> ready;
  for (std::size_t r = 0; r < n; ++r)
    if (indegree[r] == 0) ready.insert({rules[r].disruptive, r});

  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    auto [_, r] = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(rules[r].rule_id);
    for (auto s : succ[r])
      if (--indegree[s] == 0) ready.insert({rules[s].disruptive, s});
  }
  if (order.size() == n) return order;

  // Report one cycle among the unscheduled rules.
  std::vector<int> color(n, 0);
  std::vector<std::size_t> stack;
  std::vector<std::size_t> cycle;
  std::function<bool(std::size_t)> dfs = [&](std::size_t u) {
    color[u] = 1;
    stack.push_back(u);
    for (auto v : succ[u]) {
      if (indegree[v] == 0) continue;
      if (color[v] == 1) {
        auto from = std::find(stack.begin(), stack.end(), v);
        cycle.assign(from, stack.end());
        cycle.push_back(v);
        return true;
      }
      if (color[v] == 0 && dfs(v)) return true;
    }
    stack.pop_back();
    color[u] = 2;
    return false;
  };
  for (std::size_t r = 0; r < n && cycle.empty(); ++r)
    if (indegree[r] != 0 && color[r] == 0) dfs(r);

  std::ostringstream msg;
  msg << "dependency cycle: ";
  for (std::size_t i = 0; i < cycle.size(); ++i) {
    if (i) msg << " -> ";
    msg << rules[cycle[i]].name() << " (line " << rules[cycle[i]].line << ")";
  }
  throw CompileError(0, msg.str());
}

const ContainerDescriptor* RuleProgram::declared(std::string_view name) const {
  auto it = object_index.find(std::string(name));
  return it == object_index.end() ? nullptr : &objects[it->second];
}

RuleProgram compile(std::vector<Rule> rules, const CompileOptions& options) {
  RuleProgram program;
  for (std::size_t i = 0; i < rules.size(); ++i) rules[i].rule_id = i + 1;

  auto field_cap_key = [](const FieldPath& p) { return p.str(); };
  std::map<std::string, std::size_t> caps;
  for (const auto& r : rules)
    for (const auto& c : r.clauses)
      if (c.op == TestOp::normalize) {
        auto key = field_cap_key(std::get<FieldPath>(c.target));
        auto cap = static_cast<std::size_t>(c.operand);
        auto [it, fresh] = caps.emplace(key, cap);
        if (!fresh) it->second = std::min(it->second, cap);
      }

  auto lifetime_for = [&](ScopeKind s) {
    switch (s) {
      case ScopeKind::global: return options.global_lifetime;
      case ScopeKind::dialog: return options.dialog_lifetime;
      case ScopeKind::transaction: return options.transaction_lifetime;
    }
    return options.global_lifetime;
  };

  for (const auto& r : rules) {
    for (const auto& a : r.actions) {
      if (!a.declares()) continue;
      if (program.object_index.count(a.object))
        throw CompileError(r.line, "object " + a.object + " declared more than once");
      ContainerDescriptor d;
      d.name = a.object;
      d.kind = a.container;
      d.scope = a.scope.value_or(a.kind == ActionKind::counter_decl ? ScopeKind::global : ScopeKind::dialog);
      d.source = a.source;
      d.lifetime = lifetime_for(d.scope);
      d.max_value_len = options.default_max_value_len;
      if (a.source) {
        auto cap = caps.find(field_cap_key(*a.source));
        if (cap != caps.end()) d.max_value_len = cap->second;
      }
      d.leak_amount = a.leak_amount;
      d.leak_interval = std::chrono::seconds(a.leak_interval_s);
      program.object_index.emplace(d.name, program.objects.size());
      program.objects.push_back(std::move(d));
    }
  }

  for (const auto& r : rules) {
    for (const auto& name : r.reads)
      if (!program.object_index.count(name)) {
        bool parent_ref = std::any_of(r.declares.begin(), r.declares.end(),
                                      [&](const std::string& d) { return parent_of(d) == name; });
        throw CompileError(r.line, parent_ref ? "parent object " + name + " never declared"
                                              : "object " + name + " never declared");
      }
    for (const auto& c : r.clauses) {
      if (c.op == TestOp::in && program.objects[program.object_index.at(c.pattern)].kind == ContainerKind::counter)
        throw CompileError(r.line, "@in needs a set, list or bag; " + c.pattern + " is a counter");
    }
  }

  auto register_path = [&](const FieldPath& p, std::size_t line) {
    try {
      FieldId id = program.parser.register_field(p);
      program.registered_fields.insert(p);
      return id;
    } catch (const UnknownField& e) {
      throw CompileError(line, e.what());
    }
  };
  for (const char* always : {"FIELDS:sip.call_id", "FIELDS:sip.from.tag", "FIELDS:sip.to.tag",
                             "FIELDS:sip.via.branch", "FIELDS:sip.cseq.method"})
    register_path(parse_field_path(always), 0);

  program.compiled.resize(rules.size());
  for (std::size_t ri = 0; ri < rules.size(); ++ri) {
    const Rule& r = rules[ri];
    CompiledRule& cr = program.compiled[ri];
    cr.rule_id = r.rule_id;
    cr.phase = r.phase;
    cr.disruptive = r.disruptive;
    for (const auto& c : r.clauses) {
      CompiledClause cc;
      cc.negated = c.negated;
      cc.op = c.op;
      cc.operand = c.operand;
      if (const auto* f = std::get_if<FieldPath>(&c.target)) {
        cc.field = register_path(*f, r.line);
        cc.target = program.parser.catalog_of(cc.field) == CatalogField::net_src_addr
                        ? CompiledClause::Target::pseudo_src_addr
                        : CompiledClause::Target::field;
        auto cap = caps.find(field_cap_key(*f));
        if (cap != caps.end()) cc.value_cap = cap->second;
      } else {
        cc.target = CompiledClause::Target::object;
        cc.object = program.object_index.at(std::get<ObjectRef>(c.target).name);
      }
      if (c.op == TestOp::in) cc.object = program.object_index.at(c.pattern);
      if (c.op == TestOp::regex) cc.regex = build_regex(c.pattern, r.line);
      cr.clauses.push_back(std::move(cc));
    }
    for (const auto& a : r.actions) {
      CompiledAction ca;
      ca.kind = a.kind;
      if (a.declares()) ca.object = program.object_index.at(a.object);
      if (a.source) {
        ca.source = register_path(*a.source, r.line);
        ca.source_is_src_addr = program.parser.catalog_of(*ca.source) == CatalogField::net_src_addr;
      }
      cr.actions.push_back(ca);
    }
  }

  program.schedule = schedule(rules);
  program.rules = std::move(rules);
  program.parser.seal();
  return program;
}

}  // namespace sipwall

#include "sipwall/sip_parser.hpp"

#include <algorithm>

#include "text_util.hpp"

namespace sipwall {

namespace {

using detail::iequals;
using detail::is_ws;
using detail::trim_range;

enum class Header : std::uint8_t { from, to, call_id, cseq, via, contact, content_length, user_agent, other };

struct HeaderName {
  std::string_view full;
  std::string_view compact;
  Header kind;
  CatalogField field;
};

constexpr HeaderName kHeaders[] = {
    {"from", "f", Header::from, CatalogField::from},
    {"to", "t", Header::to, CatalogField::to},
    {"call-id", "i", Header::call_id, CatalogField::call_id},
    {"cseq", "", Header::cseq, CatalogField::cseq},
    {"via", "v", Header::via, CatalogField::via},
    {"contact", "m", Header::contact, CatalogField::contact},
    {"content-length", "l", Header::content_length, CatalogField::content_length},
    {"user-agent", "", Header::user_agent, CatalogField::user_agent},
};

Header classify(std::string_view name) {
  for (const auto& h : kHeaders)
    if (iequals(name, h.full) || (!h.compact.empty() && iequals(name, h.compact))) return h.kind;
  return Header::other;
}

// First position in [b, e) holding one of `stops`, skipping quoted strings
// and bracketed sections.
std::size_t find_top_level(std::string_view raw, std::size_t b, std::size_t e, std::string_view stops) {
  bool quoted = false;
  int angle = 0, square = 0;
  for (std::size_t i = b; i < e; ++i) {
    char c = raw[i];
    if (quoted) {
      if (c == '\\') ++i;
      else if (c == '"') quoted = false;
      continue;
    }
    if (angle == 0 && square == 0 && stops.find(c) != std::string_view::npos) return i;
    if (c == '"') quoted = true;
    else if (c == '<') ++angle;
    else if (c == '>' && angle > 0) --angle;
    else if (c == '[') ++square;
    else if (c == ']' && square > 0) --square;
  }
  return e;
}

struct Range {
  std::size_t b = 0;
  std::size_t e = 0;
  bool empty() const { return b >= e; }
};

// Looks for `;name=value` in the parameter section [b, e).
std::optional<Range> find_param(std::string_view raw, std::size_t b, std::size_t e, std::string_view name) {
  std::size_t pos = b;
  while (pos < e) {
    std::size_t semi = find_top_level(raw, pos, e, ";");
    if (semi >= e) break;
    std::size_t seg_b = semi + 1;
    std::size_t seg_e = find_top_level(raw, seg_b, e, ";");
    std::size_t eq = raw.substr(0, seg_e).find('=', seg_b);
    std::size_t name_b = seg_b, name_e = eq == std::string_view::npos ? seg_e : eq;
    trim_range(raw, name_b, name_e);
    if (eq != std::string_view::npos && iequals(raw.substr(name_b, name_e - name_b), name)) {
      Range v{eq + 1, seg_e};
      trim_range(raw, v.b, v.e);
      if (!v.empty()) return v;
      return std::nullopt;
    }
    pos = seg_e;
  }
  return std::nullopt;
}

class TreeBuilder {
 public:
  TreeBuilder(const std::array<FieldId, kCatalogSize>& ids, std::string_view raw, ParseTree& tree)
      : ids_(ids), raw_(raw), tree_(tree) {
    index_.fill(-1);
  }

  bool wanted(CatalogField f) const { return ids_[static_cast<std::size_t>(f)] != 0; }

  void add(CatalogField f, Range r, bool allow_empty) {
    if (!wanted(f)) return;
    trim_range(raw_, r.b, r.e);
    if (r.b > r.e) r.e = r.b;
    if (r.empty() && !allow_empty) return;
    ParseNode node;
    node.field_id = ids_[static_cast<std::size_t>(f)];
    node.field_type = catalog_entry(f).type;
    node.start_offset = r.b;
    node.end_offset = r.e;
    node.value.assign(raw_.substr(r.b, r.e - r.b));
    if (auto parent = catalog_entry(f).parent) {
      auto pi = index_[static_cast<std::size_t>(*parent)];
      if (pi >= 0) {
        node.parent = tree_.nodes[pi].field_id;
        tree_.nodes[pi].children.push_back(node.field_id);
      }
    }
    index_[static_cast<std::size_t>(f)] = static_cast<std::int16_t>(tree_.nodes.size());
    tree_.nodes.push_back(std::move(node));
  }

  void address_header(CatalogField top, CatalogField addr, CatalogField tag, Range r) {
    add(top, r, true);
    if (!wanted(addr) && !wanted(tag)) return;
    trim_range(raw_, r.b, r.e);
    Range uri;
    std::size_t params_b;
    std::size_t lt = find_top_level(raw_, r.b, r.e, "<");
    if (lt < r.e) {
      std::size_t gt = raw_.substr(0, r.e).find('>', lt);
      uri = {lt + 1, gt == std::string_view::npos ? r.e : gt};
      params_b = gt == std::string_view::npos ? r.e : gt + 1;
    } else {
      std::size_t semi = find_top_level(raw_, r.b, r.e, ";");
      uri = {r.b, semi};
      params_b = semi;
    }
    if (wanted(addr)) {
      if (auto host = uri_host(uri)) add(addr, *host, false);
    }
    if (wanted(tag)) {
      // find_param expects to start on the separator
      if (params_b < r.e) {
        std::size_t first = params_b;
        while (first < r.e && raw_[first] != ';') ++first;
        if (auto t = find_param(raw_, first, r.e, "tag")) add(tag, *t, false);
      }
    }
  }

  void via_header(Range r) {
    trim_range(raw_, r.b, r.e);
    Range top{r.b, find_top_level(raw_, r.b, r.e, ",")};
    add(CatalogField::via, top, true);
    if (wanted(CatalogField::via_branch)) {
      std::size_t semi = find_top_level(raw_, top.b, top.e, ";");
      if (auto br = find_param(raw_, semi, top.e, "branch")) add(CatalogField::via_branch, *br, false);
    }
  }

  void cseq_header(Range r) {
    add(CatalogField::cseq, r, true);
    if (!wanted(CatalogField::cseq_method)) return;
    trim_range(raw_, r.b, r.e);
    std::size_t i = r.b;
    while (i < r.e && std::isdigit(static_cast<unsigned char>(raw_[i]))) ++i;
    if (i == r.b || i >= r.e || !is_ws(raw_[i])) return;
    Range m{i, r.e};
    trim_range(raw_, m.b, m.e);
    if (detail::is_token(raw_.substr(m.b, m.e - m.b))) add(CatalogField::cseq_method, m, false);
  }

  void finish() {
    std::sort(tree_.nodes.begin(), tree_.nodes.end(),
              [](const ParseNode& a, const ParseNode& b) { return a.field_id < b.field_id; });
    for (std::size_t i = 0; i < tree_.nodes.size(); ++i) {
      for (std::size_t f = 0; f < kCatalogSize; ++f)
        if (ids_[f] == tree_.nodes[i].field_id) index_[f] = static_cast<std::int16_t>(i);
    }
  }

  const std::array<std::int16_t, kCatalogSize>& index() const { return index_; }

 private:
  std::optional<Range> uri_host(Range uri) const {
    trim_range(raw_, uri.b, uri.e);
    std::size_t colon = raw_.substr(0, uri.e).find(':', uri.b);
    if (colon == std::string_view::npos) return std::nullopt;
    std::size_t h = colon + 1;
    std::size_t stop = h;
    while (stop < uri.e && raw_[stop] != ';' && raw_[stop] != '?') ++stop;
    std::size_t at = raw_.substr(0, stop).rfind('@');
    if (at != std::string_view::npos && at >= h) h = at + 1;
    std::size_t end = h;
    if (h < stop && raw_[h] == '[') {
      std::size_t close = raw_.substr(0, stop).find(']', h);
      end = close == std::string_view::npos ? stop : close + 1;
    } else {
      while (end < stop && raw_[end] != ':' && raw_[end] != '>' && !is_ws(raw_[end])) ++end;
    }
    if (end <= h) return std::nullopt;
    return Range{h, end};
  }

  const std::array<FieldId, kCatalogSize>& ids_;
  std::string_view raw_;
  ParseTree& tree_;
  std::array<std::int16_t, kCatalogSize> index_{};
};

bool sip_version(std::string_view v) {
  if (!detail::istarts_with(v, "SIP/")) return false;
  v.remove_prefix(4);
  auto dot = v.find('.');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 == v.size()) return false;
  return std::all_of(v.begin(), v.begin() + dot, [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) &&
         std::all_of(v.begin() + dot + 1, v.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

std::size_t line_content_end(std::string_view raw, std::size_t start, std::size_t& next) {
  std::size_t nl = raw.find('\n', start);
  std::size_t end = nl == std::string_view::npos ? raw.size() : nl;
  next = nl == std::string_view::npos ? raw.size() : nl + 1;
  if (end > start && raw[end - 1] == '\r') --end;
  return end;
}

}  // namespace

const ParseNode* ParseTree::find(FieldId id) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                             [](const ParseNode& n, FieldId v) { return n.field_id < v; });
  return it != nodes.end() && it->field_id == id ? &*it : nullptr;
}

const ParseNode* ParseTree::find(CatalogField f) const {
  auto i = by_catalog_[static_cast<std::size_t>(f)];
  return i == kNone ? nullptr : &nodes[static_cast<std::size_t>(i)];
}

std::optional<std::string_view> ParseTree::value(CatalogField f) const {
  if (const auto* n = find(f)) return std::string_view(n->value);
  return std::nullopt;
}

FieldId SipParser::register_field(const FieldPath& path) {
  auto field = catalog_lookup(path);
  if (!field) throw UnknownField(path.str());
  auto& slot = id_by_catalog_[static_cast<std::size_t>(*field)];
  if (slot != 0) return slot;
  if (sealed_) throw std::logic_error("parser sealed; cannot register " + path.str());
  paths_.push_back(path);
  catalog_.push_back(*field);
  slot = static_cast<FieldId>(paths_.size());
  return slot;
}

std::optional<FieldId> SipParser::id_of(CatalogField f) const {
  FieldId id = id_by_catalog_[static_cast<std::size_t>(f)];
  if (id == 0) return std::nullopt;
  return id;
}

ParseTree SipParser::parse_message(std::string_view raw) const {
  if (paths_.empty()) throw std::logic_error("parse_message called with no registered fields");
  if (raw.empty()) throw MalformedMessage("empty message");

  ParseTree tree;
  tree.raw_length = raw.size();
  TreeBuilder builder(id_by_catalog_, raw, tree);

  std::size_t pos = 0;
  std::size_t start_end = line_content_end(raw, 0, pos);
  std::string_view start = raw.substr(0, start_end);
  std::size_t sp1 = start.find(' ');
  if (sp1 == std::string_view::npos) throw MalformedMessage("start line has no SP");
  std::size_t sp2 = start.find(' ', sp1 + 1);

  if (detail::istarts_with(start, "SIP/")) {
    if (!sip_version(start.substr(0, sp1))) throw MalformedMessage("bad SIP version in status line");
    std::size_t code_end = sp2 == std::string_view::npos ? start.size() : sp2;
    std::string_view code = start.substr(sp1 + 1, code_end - sp1 - 1);
    auto status = code.size() == 3 ? detail::parse_int(code) : std::nullopt;
    if (!status || *status < 100 || *status > 699) throw MalformedMessage("bad status code");
    tree.message_kind = MessageKind::response;
    tree.status_code = static_cast<int>(*status);
    builder.add(CatalogField::status, {sp1 + 1, code_end}, false);
  } else {
    if (sp2 == std::string_view::npos) throw MalformedMessage("request line needs three elements");
    std::string_view method = start.substr(0, sp1);
    std::string_view uri = start.substr(sp1 + 1, sp2 - sp1 - 1);
    std::string_view version = start.substr(sp2 + 1);
    if (!detail::is_token(method)) throw MalformedMessage("bad method token");
    if (uri.empty() || uri.find(':') == std::string_view::npos ||
        std::any_of(uri.begin(), uri.end(), is_ws))
      throw MalformedMessage("bad Request-URI");
    if (!sip_version(version)) throw MalformedMessage("bad SIP version in request line");
    tree.message_kind = MessageKind::request;
    tree.method.assign(method);
    builder.add(CatalogField::method, {0, sp1}, false);
    builder.add(CatalogField::uri, {sp1 + 1, sp2}, false);
  }

  std::array<bool, 9> needed{};
  for (const auto& h : kHeaders) {
    bool want = builder.wanted(h.field);
    for (std::size_t f = 0; f < kCatalogSize; ++f) {
      auto parent = catalog_entry(static_cast<CatalogField>(f)).parent;
      if (parent == h.field && builder.wanted(static_cast<CatalogField>(f))) want = true;
    }
    needed[static_cast<std::size_t>(h.kind)] = want;
  }
  std::array<bool, 9> seen{};

  Header cur = Header::other;
  Range cur_range;
  bool have_header = false;
  std::size_t body_start = raw.size();

  auto flush = [&] {
    if (!have_header || cur == Header::other) return;
    auto k = static_cast<std::size_t>(cur);
    if (!needed[k] || seen[k]) return;
    seen[k] = true;
    ++tree.header_values_parsed;
    switch (cur) {
      case Header::from:
        builder.address_header(CatalogField::from, CatalogField::from_addr, CatalogField::from_tag, cur_range);
        break;
      case Header::to:
        builder.address_header(CatalogField::to, CatalogField::to_addr, CatalogField::to_tag, cur_range);
        break;
      case Header::via: builder.via_header(cur_range); break;
      case Header::cseq: builder.cseq_header(cur_range); break;
      case Header::call_id: builder.add(CatalogField::call_id, cur_range, true); break;
      case Header::contact: builder.add(CatalogField::contact, cur_range, true); break;
      case Header::content_length: builder.add(CatalogField::content_length, cur_range, true); break;
      case Header::user_agent: builder.add(CatalogField::user_agent, cur_range, true); break;
      case Header::other: break;
    }
  };

  while (pos < raw.size()) {
    std::size_t line_start = pos;
    std::size_t end = line_content_end(raw, line_start, pos);
    if (end == line_start) {
      body_start = pos;
      break;
    }
    if (raw[line_start] == ' ' || raw[line_start] == '\t') {
      if (!have_header) throw MalformedMessage("continuation line before any header");
      cur_range.e = end;
      continue;
    }
    flush();
    std::size_t colon = raw.substr(0, end).find(':', line_start);
    if (colon == std::string_view::npos) throw MalformedMessage("header line without colon");
    std::size_t name_b = line_start, name_e = colon;
    trim_range(raw, name_b, name_e);
    std::string_view name = raw.substr(name_b, name_e - name_b);
    if (!detail::is_token(name)) throw MalformedMessage("bad header name");
    cur = classify(name);
    cur_range = {colon + 1, end};
    have_header = true;
  }
  flush();

  if (body_start < raw.size()) builder.add(CatalogField::body_raw, {body_start, raw.size()}, false);

  builder.finish();
  tree.by_catalog_ = builder.index();
  return tree;
}

std::optional<DialogKey> extract_dialog_key(const ParseTree& tree) {
  auto call_id = tree.value(CatalogField::call_id);
  if (!call_id || call_id->empty()) return std::nullopt;
  DialogKey key{std::string(*call_id), {}, {}};
  if (auto t = tree.value(CatalogField::from_tag)) key.from_tag.assign(*t);
  if (auto t = tree.value(CatalogField::to_tag)) key.to_tag.assign(*t);
  return key;
}

std::optional<TransactionKey> extract_transaction_key(const ParseTree& tree) {
  auto branch = tree.value(CatalogField::via_branch);
  auto method = tree.value(CatalogField::cseq_method);
  if (!branch || !method || branch->empty() || method->empty()) return std::nullopt;
  return TransactionKey{std::string(*branch), std::string(*method)};
}

std::string_view normalize_value(std::string_view value, std::size_t max_len) {
  if (value.size() <= max_len) return value;
  std::string_view out = value.substr(0, max_len);
  if (!out.empty() && out.back() == '\r' && value[max_len] == '\n') out.remove_suffix(1);
  return out;
}

}  // namespace sipwall

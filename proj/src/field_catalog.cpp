#include "sipwall/field_catalog.hpp"

#include <array>
#include <cctype>

#include "text_util.hpp"

namespace sipwall {

namespace {

using enum CatalogField;

constexpr std::array<CatalogEntry, kCatalogSize> kCatalog{{
    {method, Namespace::fields, "sip.method", FieldType::token, std::nullopt},
    {uri, Namespace::fields, "sip.uri", FieldType::uri, std::nullopt},
    {status, Namespace::fields, "sip.status", FieldType::numeric, std::nullopt},
    {from, Namespace::fields, "sip.from", FieldType::address, std::nullopt},
    {from_addr, Namespace::fields, "sip.from.addr", FieldType::text, from},
    {from_tag, Namespace::fields, "sip.from.tag", FieldType::token, from},
    {to, Namespace::fields, "sip.to", FieldType::address, std::nullopt},
    {to_addr, Namespace::fields, "sip.to.addr", FieldType::text, to},
    {to_tag, Namespace::fields, "sip.to.tag", FieldType::token, to},
    {call_id, Namespace::fields, "sip.call_id", FieldType::text, std::nullopt},
    {cseq, Namespace::fields, "sip.cseq", FieldType::text, std::nullopt},
    {cseq_method, Namespace::fields, "sip.cseq.method", FieldType::token, cseq},
    {via, Namespace::fields, "sip.via", FieldType::text, std::nullopt},
    {via_branch, Namespace::fields, "sip.via.branch", FieldType::token, via},
    {contact, Namespace::fields, "sip.contact", FieldType::address, std::nullopt},
    {content_length, Namespace::fields, "sip.content_length", FieldType::numeric, std::nullopt},
    {user_agent, Namespace::fields, "sip.user_agent", FieldType::text, std::nullopt},
    {body_raw, Namespace::body, "raw", FieldType::text, std::nullopt},
    {net_src_addr, Namespace::fields, "net.src_addr", FieldType::text, std::nullopt, true},
}};

bool valid_identifier(std::string_view s) {
  if (s.empty()) return false;
  auto first = static_cast<unsigned char>(s.front());
  if (!(std::isalpha(first) || first == '_')) return false;
  for (unsigned char c : s)
    if (!(std::isalnum(c) || c == '_')) return false;
  return true;
}

std::optional<std::pair<Namespace, std::size_t>> namespace_prefix(std::string_view text) {
  struct Prefix {
    std::string_view name;
    Namespace ns;
  };
  static constexpr Prefix kPrefixes[] = {
      {"fields:", Namespace::fields},
      {"message_headers:", Namespace::fields},
      {"body:", Namespace::body},
  };
  for (const auto& p : kPrefixes)
    if (detail::istarts_with(text, p.name)) return std::pair{p.ns, p.name.size()};
  return std::nullopt;
}

}  // namespace

std::string FieldPath::str() const {
  std::string out = ns == Namespace::body ? "BODY:" : "FIELDS:";
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i) out += '.';
    out += segments[i];
  }
  return out;
}

bool looks_like_field_path(std::string_view text) { return namespace_prefix(text).has_value(); }

FieldPath parse_field_path(std::string_view text) {
  auto prefix = namespace_prefix(text);
  if (!prefix) throw std::invalid_argument("field path lacks FIELDS:/BODY: prefix: " + std::string(text));
  FieldPath path{prefix->first, {}};
  std::string_view rest = text.substr(prefix->second);
  while (true) {
    auto dot = rest.find('.');
    std::string_view seg = rest.substr(0, dot);
    if (!valid_identifier(seg)) throw std::invalid_argument("bad field path segment in " + std::string(text));
    path.segments.push_back(detail::to_lower(seg));
    if (dot == std::string_view::npos) break;
    rest.remove_prefix(dot + 1);
  }
  return path;
}

const CatalogEntry& catalog_entry(CatalogField f) { return kCatalog[static_cast<std::size_t>(f)]; }

std::optional<CatalogField> catalog_lookup(const FieldPath& path) {
  std::string dotted;
  for (std::size_t i = 0; i < path.segments.size(); ++i) {
    if (i) dotted += '.';
    dotted += path.segments[i];
  }
  for (const auto& e : kCatalog)
    if (e.ns == path.ns && e.path == dotted) return e.field;
  return std::nullopt;
}

}  // namespace sipwall

#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sipwall {

enum class Namespace : std::uint8_t { fields, body };

// A rule-level reference to a message field, e.g. FIELDS:sip.via.branch.
// Segments are stored lower-cased; matching is case-insensitive.
struct FieldPath {
  Namespace ns = Namespace::fields;
  std::vector<std::string> segments;

  std::string str() const;
  auto operator<=>(const FieldPath&) const = default;
};

// Parses "FIELDS:a.b.c" or "BODY:raw". MESSAGE_HEADERS is accepted as an
// alias of FIELDS. Throws std::invalid_argument on bad syntax.
FieldPath parse_field_path(std::string_view text);

// True when text starts with a namespace prefix (FIELDS:, BODY:, ...).
bool looks_like_field_path(std::string_view text);

enum class FieldType : std::uint8_t { token, text, numeric, uri, address };

// Every path the parser knows how to materialize.
enum class CatalogField : std::uint8_t {
  method,
  uri,
  status,
  from,
  from_addr,
  from_tag,
  to,
  to_addr,
  to_tag,
  call_id,
  cseq,
  cseq_method,
  via,
  via_branch,
  contact,
  content_length,
  user_agent,
  body_raw,
  net_src_addr,  // filled by the engine from the transport source
  count_
};

inline constexpr std::size_t kCatalogSize = static_cast<std::size_t>(CatalogField::count_);

struct CatalogEntry {
  CatalogField field;
  Namespace ns;
  std::string_view path;  // dotted, lower case
  FieldType type;
  std::optional<CatalogField> parent;
  bool pseudo = false;
};

const CatalogEntry& catalog_entry(CatalogField f);
std::optional<CatalogField> catalog_lookup(const FieldPath& path);

class UnknownField : public std::invalid_argument {
 public:
  explicit UnknownField(const std::string& path)
      : std::invalid_argument("unknown field " + path) {}
};

}  // namespace sipwall

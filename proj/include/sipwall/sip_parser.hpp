#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sipwall/field_catalog.hpp"

namespace sipwall {

using FieldId = std::uint32_t;

struct ParseNode {
  FieldId field_id = 0;
  FieldType field_type = FieldType::text;
  std::size_t start_offset = 0;
  std::size_t end_offset = 0;  // exclusive
  std::string value;
  std::optional<FieldId> parent;
  std::vector<FieldId> children;

  bool operator==(const ParseNode&) const = default;
};

enum class MessageKind : std::uint8_t { request, response };

// Result of parsing one message against the registered field set. Immutable
// once returned by SipParser::parse_message.
struct ParseTree {
  MessageKind message_kind = MessageKind::request;
  std::string method;              // requests only
  std::optional<int> status_code;  // responses only
  std::size_t raw_length = 0;
  std::vector<ParseNode> nodes;    // sorted by field_id
  std::size_t header_values_parsed = 0;

  const ParseNode* find(FieldId id) const;
  const ParseNode* find(CatalogField f) const;
  std::optional<std::string_view> value(CatalogField f) const;

  bool operator==(const ParseTree&) const = default;

 private:
  friend class SipParser;
  static constexpr std::int16_t kNone = -1;
  std::array<std::int16_t, kCatalogSize> by_catalog_ = make_empty_index();

  static constexpr std::array<std::int16_t, kCatalogSize> make_empty_index() {
    std::array<std::int16_t, kCatalogSize> a{};
    a.fill(kNone);
    return a;
  }
};

class MalformedMessage : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Lazy SIP parser: only fields registered before sealing are materialized.
// A sealed parser is read-only and may be shared between threads.
class SipParser {
 public:
  // Same path twice yields the same id. Throws UnknownField for paths outside
  // the catalog and std::logic_error once sealed.
  FieldId register_field(const FieldPath& path);
  void seal() { sealed_ = true; }
  bool sealed() const { return sealed_; }

  std::size_t field_count() const { return paths_.size(); }
  const FieldPath& path_of(FieldId id) const { return paths_.at(id - 1); }
  CatalogField catalog_of(FieldId id) const { return catalog_.at(id - 1); }
  std::optional<FieldId> id_of(CatalogField f) const;
  bool is_registered(CatalogField f) const { return id_of(f).has_value(); }

  // Throws MalformedMessage if the start line is not a SIP request or
  // response line, or the header section is structurally broken.
  ParseTree parse_message(std::string_view raw) const;

 private:
  std::vector<FieldPath> paths_;
  std::vector<CatalogField> catalog_;
  std::array<FieldId, kCatalogSize> id_by_catalog_{};  // 0 = unregistered
  bool sealed_ = false;
};

struct DialogKey {
  std::string call_id;
  std::string from_tag;
  std::string to_tag;

  auto operator<=>(const DialogKey&) const = default;
};

struct TransactionKey {
  std::string branch;
  std::string cseq_method;

  auto operator<=>(const TransactionKey&) const = default;
};

// Absent when Call-ID is missing; missing tags become empty strings.
std::optional<DialogKey> extract_dialog_key(const ParseTree& tree);
// Topmost Via branch plus CSeq method; absent if either is missing.
std::optional<TransactionKey> extract_transaction_key(const ParseTree& tree);

// Byte-wise truncation to at most max_len bytes. A trailing CR whose LF was
// cut off is dropped too, so a CRLF pair is never split.
std::string_view normalize_value(std::string_view value, std::size_t max_len);

namespace detail {
inline void hash_combine(std::size_t& seed, std::size_t h) {
  seed ^= h + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
}
}  // namespace detail

}  // namespace sipwall

template <>
struct std::hash<sipwall::DialogKey> {
  std::size_t operator()(const sipwall::DialogKey& k) const noexcept {
    std::size_t seed = std::hash<std::string>{}(k.call_id);
    sipwall::detail::hash_combine(seed, std::hash<std::string>{}(k.from_tag));
    sipwall::detail::hash_combine(seed, std::hash<std::string>{}(k.to_tag));
    return seed;
  }
};

template <>
struct std::hash<sipwall::TransactionKey> {
  std::size_t operator()(const sipwall::TransactionKey& k) const noexcept {
    std::size_t seed = std::hash<std::string>{}(k.branch);
    sipwall::detail::hash_combine(seed, std::hash<std::string>{}(k.cseq_method));
    return seed;
  }
};

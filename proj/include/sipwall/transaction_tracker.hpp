#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <unordered_map>

#include "sipwall/sip_parser.hpp"
#include "sipwall/state_store.hpp"

namespace sipwall {

enum class TransactionClass : std::uint8_t { invite, non_invite };

// RFC 3261 client/server transaction machines collapsed to four states.
// `trying` stands for both Calling (INVITE) and Trying (non-INVITE).
enum class TransactionState : std::uint8_t { trying, proceeding, completed, terminated };

std::string_view to_string(TransactionState s);

struct TransactionRecord {
  TransactionKey key;
  TransactionClass cls = TransactionClass::non_invite;
  TransactionState state = TransactionState::trying;
  Timestamp last_update{0};
};

class TransactionTracker {
 public:
  explicit TransactionTracker(Timestamp lifetime = std::chrono::seconds(32)) : lifetime_(lifetime) {}

  // Requests pass their method (status 0); responses pass their status code.
  const TransactionRecord& update(const TransactionKey& key, MessageKind kind, int status, Timestamp now);

  const TransactionRecord* find(const TransactionKey& key) const;

  // Drops terminated records and records idle longer than the lifetime.
  std::size_t expire(Timestamp now);
  std::size_t live() const { return records_.size(); }

 private:
  Timestamp lifetime_;
  std::unordered_map<TransactionKey, TransactionRecord> records_;
};

}  // namespace sipwall

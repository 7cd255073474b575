#include "sipwall/transaction_tracker.hpp"

namespace sipwall {

std::string_view to_string(TransactionState s) {
  switch (s) {
    case TransactionState::trying: return "trying";
    case TransactionState::proceeding: return "proceeding";
    case TransactionState::completed: return "completed";
    case TransactionState::terminated: return "terminated";
  }
  return "?";
}

namespace {

TransactionState after_response(TransactionState current, int status) {
  if (current == TransactionState::terminated) return current;
  if (status >= 200) return TransactionState::completed;
  return current == TransactionState::completed ? current : TransactionState::proceeding;
}

}  // namespace

const TransactionRecord& TransactionTracker::update(const TransactionKey& key, MessageKind kind, int status,
                                                    Timestamp now) {
  TransactionClass cls = key.cseq_method == "INVITE" ? TransactionClass::invite : TransactionClass::non_invite;

  if (kind == MessageKind::request && key.cseq_method == "ACK") {
    // ACK to a non-2xx final response shares the INVITE branch and ends it.
    auto invite = records_.find(TransactionKey{key.branch, "INVITE"});
    if (invite != records_.end()) {
      invite->second.state = TransactionState::terminated;
      invite->second.last_update = now;
    }
    auto& ack = records_[key];
    ack = TransactionRecord{key, TransactionClass::invite, TransactionState::terminated, now};
    return ack;
  }

  auto it = records_.find(key);
  if (it == records_.end()) {
    TransactionRecord rec{key, cls, TransactionState::trying, now};
    if (kind == MessageKind::response) rec.state = after_response(TransactionState::trying, status);
    return records_.emplace(key, std::move(rec)).first->second;
  }
  auto& rec = it->second;
  if (kind == MessageKind::response) rec.state = after_response(rec.state, status);
  rec.last_update = now;
  return rec;
}

const TransactionRecord* TransactionTracker::find(const TransactionKey& key) const {
  auto it = records_.find(key);
  return it == records_.end() ? nullptr : &it->second;
}

std::size_t TransactionTracker::expire(Timestamp now) {
  std::size_t n = 0;
  for (auto it = records_.begin(); it != records_.end();) {
    if (it->second.state == TransactionState::terminated || now - it->second.last_update > lifetime_) {
      it = records_.erase(it);
      ++n;
    } else {
      ++it;
    }
  }
  return n;
}

}  // namespace sipwall

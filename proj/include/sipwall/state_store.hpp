#pragma once

#include <chrono>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "sipwall/field_catalog.hpp"
#include "sipwall/sip_parser.hpp"

namespace sipwall {

// Message-clock time: microseconds since the trace epoch.
using Timestamp = std::chrono::microseconds;

inline constexpr Timestamp kForever = Timestamp::max();

inline constexpr Timestamp seconds(double s) {
  return Timestamp(static_cast<std::int64_t>(s * 1'000'000.0));
}

enum class ContainerKind : std::uint8_t { set, list, bag, counter };
enum class ScopeKind : std::uint8_t { global, dialog, transaction };

std::string_view to_string(ContainerKind k);
std::string_view to_string(ScopeKind s);

struct ScopeKey {
  std::variant<std::monostate, DialogKey, TransactionKey> key;

  static ScopeKey global() { return {}; }
  static ScopeKey dialog(DialogKey k) { return {std::move(k)}; }
  static ScopeKey transaction(TransactionKey k) { return {std::move(k)}; }

  ScopeKind kind() const { return static_cast<ScopeKind>(key.index()); }
  bool operator==(const ScopeKey&) const = default;
};

struct ContainerDescriptor {
  std::string name;
  ContainerKind kind = ContainerKind::set;
  ScopeKind scope = ScopeKind::dialog;
  std::optional<FieldPath> source;  // counters have none
  Timestamp lifetime = kForever;
  std::size_t max_value_len = 1024;
  // counters only
  std::int64_t leak_amount = 0;
  Timestamp leak_interval = std::chrono::seconds(1);
};

// Leaky counter with lazy settlement: whole elapsed intervals since the
// anchor each remove leak_amount, clamped at zero.
struct CounterState {
  std::int64_t value = 0;
  std::int64_t leak_amount = 0;
  Timestamp leak_interval = std::chrono::seconds(1);
  Timestamp anchor{0};

  std::int64_t value_at(Timestamp now) const;
  void settle(Timestamp now);
};

class ContainerInstance {
 public:
  using Set = std::unordered_set<std::string>;
  using List = std::vector<std::string>;
  using Bag = std::unordered_map<std::string, std::size_t>;
  using Payload = std::variant<Set, List, Bag, CounterState>;

  ContainerInstance(const ContainerDescriptor& descriptor, Timestamp now);

  const ContainerDescriptor& descriptor() const { return *descriptor_; }
  ContainerKind kind() const { return descriptor_->kind; }
  Timestamp created_at() const { return created_at_; }
  Timestamp last_touched() const { return last_touched_; }
  const Payload& payload() const { return payload_; }

  // set/list/bag. Values are normalized to max_value_len first.
  void insert(std::string_view value, Timestamp now);
  bool contains(std::string_view value) const;
  std::size_t multiplicity(std::string_view value) const;
  // Element count for collections; effective value for counters.
  std::int64_t size(Timestamp now) const;

  std::int64_t counter_increment(Timestamp now);
  std::int64_t counter_value(Timestamp now) const;

 private:
  friend class StateStore;
  void touch(Timestamp now) { if (now > last_touched_) last_touched_ = now; }

  const ContainerDescriptor* descriptor_;
  Timestamp created_at_;
  Timestamp last_touched_;
  Payload payload_;
};

// All stateful objects of a loaded program, addressed by
// (object index, scope key). Owned by a single inspection thread.
class StateStore {
 public:
  explicit StateStore(std::vector<ContainerDescriptor> descriptors);
  StateStore(const StateStore&) = delete;
  StateStore& operator=(const StateStore&) = delete;
  StateStore(StateStore&&) = default;

  const std::vector<ContainerDescriptor>& descriptors() const { return descriptors_; }
  std::optional<std::size_t> index_of(std::string_view name) const;

  // Live instance for (object, key), created empty if missing or expired.
  // A confirmed-dialog key (non-empty To tag) adopts the early-dialog
  // instance stored under the same Call-ID/From tag with an empty To tag.
  ContainerInstance& resolve(std::size_t object, const ScopeKey& key, Timestamp now);
  ContainerInstance& resolve(std::string_view name, const ScopeKey& key, Timestamp now);

  // Read-only lookup; never creates. Falls back to the early-dialog key the
  // same way resolve does.
  const ContainerInstance* find(std::size_t object, const ScopeKey& key, Timestamp now) const;

  // Evicts instances idle for longer than their lifetime.
  std::size_t expire(Timestamp now);

  std::size_t live_instances() const { return instances_.size(); }
  std::size_t live_instances(std::size_t object) const { return per_object_.at(object); }

 private:
  struct InstanceKey {
    std::size_t object;
    ScopeKey scope;
    bool operator==(const InstanceKey&) const = default;
  };
  struct InstanceKeyHash {
    std::size_t operator()(const InstanceKey& k) const noexcept;
  };

  static bool expired(const ContainerInstance& inst, Timestamp now);
  static std::optional<InstanceKey> early_dialog_key(const InstanceKey& k);

  std::vector<ContainerDescriptor> descriptors_;
  std::unordered_map<InstanceKey, ContainerInstance, InstanceKeyHash> instances_;
  std::vector<std::size_t> per_object_;
};

}  // namespace sipwall

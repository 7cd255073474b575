#include "sipwall/state_store.hpp"

#include <algorithm>
#include <cassert>
#include <type_traits>
#include <stdexcept>

namespace sipwall {

std::string_view to_string(ContainerKind k) {
  switch (k) {
    case ContainerKind::set: return "set";
    case ContainerKind::list: return "list";
    case ContainerKind::bag: return "bag";
    case ContainerKind::counter: return "counter";
  }
  return "?";
}

std::string_view to_string(ScopeKind s) {
  switch (s) {
    case ScopeKind::global: return "global";
    case ScopeKind::dialog: return "dialog";
    case ScopeKind::transaction: return "transaction";
  }
  return "?";
}

std::int64_t CounterState::value_at(Timestamp now) const {
  if (leak_amount <= 0 || now <= anchor || value <= 0) return value < 0 ? 0 : value;
  std::int64_t intervals = (now - anchor) / leak_interval;
  if (intervals == 0) return value;
  // saturating: max(0, value - leak * intervals) without overflow
  if (intervals >= (value + leak_amount - 1) / leak_amount) return 0;
  return value - leak_amount * intervals;
}

void CounterState::settle(Timestamp now) {
  if (now <= anchor) return;
  std::int64_t intervals = (now - anchor) / leak_interval;
  if (intervals == 0) return;
  value = value_at(now);
  anchor += leak_interval * intervals;
}

ContainerInstance::ContainerInstance(const ContainerDescriptor& descriptor, Timestamp now)
    : descriptor_(&descriptor), created_at_(now), last_touched_(now) {
  switch (descriptor.kind) {
    case ContainerKind::set: payload_ = Set{}; break;
    case ContainerKind::list: payload_ = List{}; break;
    case ContainerKind::bag: payload_ = Bag{}; break;
    case ContainerKind::counter:
      payload_ = CounterState{0, descriptor.leak_amount, descriptor.leak_interval, now};
      break;
  }
}

void ContainerInstance::insert(std::string_view value, Timestamp now) {
  std::string v(normalize_value(value, descriptor_->max_value_len));
  assert(v.size() <= descriptor_->max_value_len);
  touch(now);
  std::visit(
      [&](auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Set>) p.insert(std::move(v));
        else if constexpr (std::is_same_v<T, List>) p.push_back(std::move(v));
        else if constexpr (std::is_same_v<T, Bag>) ++p[std::move(v)];
        else throw std::logic_error("insert on counter " + descriptor_->name);
      },
      payload_);
}

std::size_t ContainerInstance::multiplicity(std::string_view value) const {
  std::string v(normalize_value(value, descriptor_->max_value_len));
  return std::visit(
      [&](const auto& p) -> std::size_t {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Set>) return p.count(v);
        else if constexpr (std::is_same_v<T, List>) return static_cast<std::size_t>(std::count(p.begin(), p.end(), v));
        else if constexpr (std::is_same_v<T, Bag>) {
          auto it = p.find(v);
          return it == p.end() ? 0 : it->second;
        } else {
          throw std::logic_error("membership test on counter " + descriptor_->name);
        }
      },
      payload_);
}

bool ContainerInstance::contains(std::string_view value) const { return multiplicity(value) > 0; }

std::int64_t ContainerInstance::size(Timestamp now) const {
  return std::visit(
      [&](const auto& p) -> std::int64_t {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, CounterState>) return p.value_at(now);
        else if constexpr (std::is_same_v<T, Bag>) {
          std::int64_t n = 0;
          for (const auto& [_, m] : p) n += static_cast<std::int64_t>(m);
          return n;
        } else {
          return static_cast<std::int64_t>(p.size());
        }
      },
      payload_);
}

std::int64_t ContainerInstance::counter_increment(Timestamp now) {
  auto* c = std::get_if<CounterState>(&payload_);
  if (!c) throw std::logic_error("increment on non-counter " + descriptor_->name);
  touch(now);
  c->settle(now);
  ++c->value;
  return c->value;
}

std::int64_t ContainerInstance::counter_value(Timestamp now) const {
  const auto* c = std::get_if<CounterState>(&payload_);
  if (!c) throw std::logic_error("counter read on non-counter " + descriptor_->name);
  return c->value_at(now);
}

StateStore::StateStore(std::vector<ContainerDescriptor> descriptors)
    : descriptors_(std::move(descriptors)), per_object_(descriptors_.size(), 0) {}

std::optional<std::size_t> StateStore::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < descriptors_.size(); ++i)
    if (descriptors_[i].name == name) return i;
  return std::nullopt;
}

std::size_t StateStore::InstanceKeyHash::operator()(const InstanceKey& k) const noexcept {
  std::size_t seed = std::hash<std::size_t>{}(k.object);
  detail::hash_combine(seed, k.scope.key.index());
  if (const auto* d = std::get_if<DialogKey>(&k.scope.key)) detail::hash_combine(seed, std::hash<DialogKey>{}(*d));
  if (const auto* t = std::get_if<TransactionKey>(&k.scope.key))
    detail::hash_combine(seed, std::hash<TransactionKey>{}(*t));
  return seed;
}

bool StateStore::expired(const ContainerInstance& inst, Timestamp now) {
  return now - inst.last_touched() > inst.descriptor().lifetime;
}

std::optional<StateStore::InstanceKey> StateStore::early_dialog_key(const InstanceKey& k) {
  const auto* d = std::get_if<DialogKey>(&k.scope.key);
  if (!d || d->to_tag.empty()) return std::nullopt;
  return InstanceKey{k.object, ScopeKey::dialog(DialogKey{d->call_id, d->from_tag, {}})};
}

ContainerInstance& StateStore::resolve(std::size_t object, const ScopeKey& key, Timestamp now) {
  if (object >= descriptors_.size()) throw std::out_of_range("undeclared object index");
  InstanceKey ik{object, key};
  auto it = instances_.find(ik);
  if (it != instances_.end() && expired(it->second, now)) {
    instances_.erase(it);
    --per_object_[object];
    it = instances_.end();
  }
  if (it == instances_.end()) {
    if (auto early = early_dialog_key(ik)) {
      auto e = instances_.find(*early);
      if (e != instances_.end() && !expired(e->second, now)) {
        auto node = instances_.extract(e);
        node.key() = ik;
        it = instances_.insert(std::move(node)).position;
      }
    }
  }
  if (it == instances_.end()) {
    it = instances_.emplace(ik, ContainerInstance(descriptors_[object], now)).first;
    ++per_object_[object];
  }
  it->second.touch(now);
  return it->second;
}

ContainerInstance& StateStore::resolve(std::string_view name, const ScopeKey& key, Timestamp now) {
  auto idx = index_of(name);
  if (!idx) throw std::logic_error("object " + std::string(name) + " never declared");
  return resolve(*idx, key, now);
}

const ContainerInstance* StateStore::find(std::size_t object, const ScopeKey& key, Timestamp now) const {
  InstanceKey ik{object, key};
  auto it = instances_.find(ik);
  if (it == instances_.end()) {
    if (auto early = early_dialog_key(ik)) it = instances_.find(*early);
  }
  if (it == instances_.end() || expired(it->second, now)) return nullptr;
  return &it->second;
}

std::size_t StateStore::expire(Timestamp now) {
  std::size_t evicted = 0;
  for (auto it = instances_.begin(); it != instances_.end();) {
    if (expired(it->second, now)) {
      --per_object_[it->first.object];
      it = instances_.erase(it);
      ++evicted;
    } else {
      ++it;
    }
  }
  return evicted;
}

}  // namespace sipwall

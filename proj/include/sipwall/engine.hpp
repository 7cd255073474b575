#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sipwall/endpoint.hpp"
#include "sipwall/rule_dsl.hpp"
#include "sipwall/sip_parser.hpp"
#include "sipwall/state_store.hpp"
#include "sipwall/transaction_tracker.hpp"

namespace sipwall {

struct MessageMeta {
  Direction direction = Direction::inbound;
  Endpoint source;
  Endpoint dest;
  Timestamp arrival{0};
};

struct MessageContext {
  const ParseTree& tree;
  std::optional<DialogKey> dialog_key;
  std::optional<TransactionKey> transaction_key;
  std::optional<TransactionClass> transaction_class;
  const MessageMeta& meta;
};

enum class Decision : std::uint8_t { forward, drop };

struct Verdict {
  Decision decision = Decision::drop;
  std::vector<std::size_t> matched_rules;  // evaluation order
  std::optional<std::size_t> dropping_rule;
  bool malformed = false;
  bool internal_error = false;
  std::string reason;  // parser or internal error text
  std::chrono::nanoseconds processing_time{0};
};

// Power-of-two microsecond buckets: bucket i counts samples in
// [2^(i-1), 2^i) us, bucket 0 counts samples under 1 us.
struct LatencyHistogram {
  static constexpr std::size_t kBuckets = 32;
  std::array<std::uint64_t, kBuckets> buckets{};

  void add(std::chrono::nanoseconds d);
  std::uint64_t total() const;
};

struct EngineStats {
  std::uint64_t processed = 0;
  std::uint64_t forwarded = 0;
  std::uint64_t dropped = 0;    // rule drops and internal errors
  std::uint64_t malformed = 0;
  std::uint64_t internal_errors = 0;
  std::map<std::string, std::size_t> live_instances;  // per object name
  std::size_t live_transactions = 0;
  LatencyHistogram latency;
};

struct EngineConfig {
  std::size_t sweep_every = 256;  // messages between expiry sweeps
  Timestamp transaction_lifetime = std::chrono::seconds(32);
};

// One inspection pipeline. process_message and finish must be called from a
// single thread; stats_snapshot may be called from any thread.
class Engine {
 public:
  explicit Engine(std::shared_ptr<const RuleProgram> program, EngineConfig config = {});

  Verdict process_message(std::string_view raw, const MessageMeta& meta);
  bool evaluate_clause(const CompiledClause& clause, const MessageContext& ctx) const;

  // Final expiry sweep at the end of a trace.
  void finish(Timestamp now);

  EngineStats stats_snapshot() const;

  const RuleProgram& program() const { return *program_; }
  const StateStore& store() const { return store_; }
  const TransactionTracker& tracker() const { return tracker_; }

 private:
  Verdict evaluate(const ParseTree& tree, const MessageMeta& meta);
  std::optional<ScopeKey> scope_key(std::size_t object, const MessageContext& ctx) const;
  void run_declaration(const CompiledAction& action, const MessageContext& ctx);
  void sweep(Timestamp now);
  void publish(const Verdict& v);

  std::shared_ptr<const RuleProgram> program_;
  EngineConfig config_;
  StateStore store_;
  TransactionTracker tracker_;
  std::vector<const CompiledRule*> ordered_;
  std::size_t since_sweep_ = 0;

  mutable std::mutex stats_mutex_;
  EngineStats stats_;
};

}  // namespace sipwall

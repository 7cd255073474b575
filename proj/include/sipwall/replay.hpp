#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sipwall/engine.hpp"
#include "sipwall/trace_io.hpp"

namespace sipwall {

// Ordered bounded queue; push blocks while full, pop blocks while empty
// until close() is called.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity ? capacity : 1) {}

  void push(T item) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
    if (closed_) return;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
  }

  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::deque<T> items_;
  bool closed_ = false;
  std::mutex mutex_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
};

enum class PacingMode : std::uint8_t { fast, timed, fixed_rate };

struct Pacing {
  PacingMode mode = PacingMode::fast;
  double rate = 0;  // fixed_rate only, messages per second

  static Pacing fast() { return {}; }
  static Pacing timed() { return {PacingMode::timed, 0}; }
  static Pacing fixed(double r) { return {PacingMode::fixed_rate, r}; }
};

// "fast", "timed" or "fixed:<rate>".
std::optional<Pacing> parse_pacing(std::string_view text);

struct ReplayReport {
  std::vector<Verdict> verdicts;     // one per record, in record order
  std::vector<double> latency_us;    // engine dequeue to verdict
  std::size_t forwarded = 0;
  std::size_t dropped = 0;
  std::size_t malformed = 0;
  double offered_rate = 0;   // messages/s; 0 when unpaced
  double achieved_rate = 0;  // messages/s over the run duration
  double duration_s = 0;
};

// Feeds every record to the engine through a bounded queue filled by a
// pacing thread. The engine runs on the calling thread and is given the
// record timestamps as its clock.
ReplayReport replay(std::span<const TraceRecord> records, Engine& engine, Pacing pacing,
                    std::size_t queue_capacity = 1024);

// Nearest-rank quantile, q in (0, 1]. Returns 0 for an empty sample.
double quantile(std::vector<double> samples, double q);

}  // namespace sipwall

#include "sipwall/replay.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "text_util.hpp"

namespace sipwall {

std::optional<Pacing> parse_pacing(std::string_view text) {
  if (text == "fast") return Pacing::fast();
  if (text == "timed") return Pacing::timed();
  if (text.substr(0, 6) == "fixed:") {
    std::string rate(text.substr(6));
    char* end = nullptr;
    double r = std::strtod(rate.c_str(), &end);
    if (end == rate.c_str() || *end != '\0' || !(r > 0) || !std::isfinite(r)) return std::nullopt;
    return Pacing::fixed(r);
  }
  return std::nullopt;
}

double quantile(std::vector<double> samples, double q) {
  if (samples.empty()) return 0;
  std::sort(samples.begin(), samples.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(samples.size())));
  rank = std::clamp<std::size_t>(rank, 1, samples.size());
  return samples[rank - 1];
}

ReplayReport replay(std::span<const TraceRecord> records, Engine& engine, Pacing pacing,
                    std::size_t queue_capacity) {
  using Clock = std::chrono::steady_clock;
  ReplayReport report;
  report.verdicts.reserve(records.size());
  report.latency_us.reserve(records.size());
  if (pacing.mode == PacingMode::fixed_rate) report.offered_rate = pacing.rate;
  if (pacing.mode == PacingMode::timed && records.size() > 1) {
    auto span = records.back().timestamp - records.front().timestamp;
    if (span.count() > 0) report.offered_rate = static_cast<double>(records.size() - 1) / (span.count() / 1e6);
  }

  BoundedQueue<std::size_t> queue(queue_capacity);
  const auto origin = Clock::now();

  std::jthread source([&] {
    for (std::size_t i = 0; i < records.size(); ++i) {
      switch (pacing.mode) {
        case PacingMode::fast: break;
        case PacingMode::timed:
          std::this_thread::sleep_until(origin + (records[i].timestamp - records.front().timestamp));
          break;
        case PacingMode::fixed_rate:
          std::this_thread::sleep_until(
              origin + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(i / pacing.rate)));
          break;
      }
      queue.push(i);
    }
    queue.close();
  });

  Timestamp last{0};
  Clock::time_point finished = origin;
  while (auto i = queue.pop()) {
    const TraceRecord& rec = records[*i];
    MessageMeta meta{rec.direction, rec.source, rec.dest, rec.timestamp};
    auto dequeued = Clock::now();
    Verdict v = engine.process_message(rec.payload, meta);
    finished = Clock::now();
    report.latency_us.push_back(std::chrono::duration<double, std::micro>(finished - dequeued).count());
    if (v.malformed) ++report.malformed;
    else if (v.decision == Decision::drop) ++report.dropped;
    else ++report.forwarded;
    report.verdicts.push_back(std::move(v));
    last = rec.timestamp;
  }
  source.join();
  engine.finish(last);

  double elapsed = std::chrono::duration<double>(finished - origin).count();
  // A paced run lasts at least as long as its send schedule.
  if (pacing.mode == PacingMode::fixed_rate) elapsed = std::max(elapsed, records.size() / pacing.rate);
  report.duration_s = elapsed;
  report.achieved_rate = elapsed > 0 ? static_cast<double>(records.size()) / elapsed : 0;
  return report;
}

}  // namespace sipwall

#pragma once

// Deterministic discrete-event core: integer-nanosecond clock, FIFO tie-broken
// event queue and a portable seeded random stream.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <unordered_set>
#include <utility>
#include <vector>

#include "netgym/error.hpp"

namespace netgym {

/// Nanoseconds since simulation start.
struct SimTime {
  std::uint64_t ticks = 0;

  constexpr auto operator<=>(const SimTime&) const = default;
};

namespace ticks {
inline constexpr std::uint64_t kPerMicrosecond = 1'000;
inline constexpr std::uint64_t kPerMillisecond = 1'000'000;
inline constexpr std::uint64_t kPerSecond = 1'000'000'000;
}  // namespace ticks

/// Checked conversion of a count of `unit` ticks; throws RangeError on overflow.
inline std::uint64_t to_ticks(std::uint64_t count, std::uint64_t unit) {
  if (unit != 0 && count > std::numeric_limits<std::uint64_t>::max() / unit) {
    throw RangeError("duration overflows 64-bit tick counter");
  }
  return count * unit;
}

using EventId = std::uint64_t;

class Simulator {
 public:
  using Action = std::function<void()>;
  using TraceHook = std::function<void(SimTime, EventId)>;

  SimTime now() const noexcept { return now_; }

  EventId schedule(std::uint64_t delay, Action action) {
    if (delay > std::numeric_limits<std::uint64_t>::max() - now_.ticks) {
      throw RangeError("event time overflows 64-bit tick counter");
    }
    return enqueue(SimTime{now_.ticks + delay}, std::move(action));
  }

  EventId schedule_at(SimTime at, Action action) {
    if (at < now_) throw RangeError("cannot schedule an event in the past");
    return enqueue(at, std::move(action));
  }

  /// Returns false if the event already ran, was cancelled, or never existed.
  bool cancel(EventId id) {
    if (pending_ids_.erase(id) == 0) return false;
    cancelled_.insert(id);
    return true;
  }

  /// Executes every event with fire_at <= `until` in (fire_at, sequence)
  /// order and leaves the clock at `until`. If an action calls stop(), the
  /// run returns right after that action with the clock at its fire time.
  SimTime run_until(SimTime until) {
    if (until < now_) throw RangeError("run_until target lies in the past");
    stop_requested_ = false;
    while (!queue_.empty()) {
      std::pop_heap(queue_.begin(), queue_.end(), Later{});
      Entry& top = queue_.back();
      if (top.at > until) {
        std::push_heap(queue_.begin(), queue_.end(), Later{});
        break;
      }
      Entry entry = std::move(top);
      queue_.pop_back();
      if (auto it = cancelled_.find(entry.sequence); it != cancelled_.end()) {
        cancelled_.erase(it);
        continue;
      }
      now_ = entry.at;
      ++executed_;
      pending_ids_.erase(entry.sequence);
      if (trace_) trace_(now_, entry.sequence);
      entry.action();
      if (stop_requested_) return now_;
    }
    now_ = until;
    return now_;
  }

  /// Asks run_until to return after the currently executing action.
  void stop() noexcept { stop_requested_ = true; }
  bool stop_requested() const noexcept { return stop_requested_; }

  std::optional<SimTime> next_event_time() const {
    std::optional<SimTime> best;
    for (const auto& e : queue_) {
      if (cancelled_.contains(e.sequence)) continue;
      if (!best || e.at < *best) best = e.at;
    }
    return best;
  }

  std::size_t pending() const noexcept { return pending_ids_.size(); }
  std::uint64_t executed() const noexcept { return executed_; }

  void set_trace(TraceHook hook) { trace_ = std::move(hook); }

 private:
  struct Entry {
    SimTime at;
    EventId sequence;
    Action action;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const noexcept {
      if (a.at != b.at) return a.at > b.at;
      return a.sequence > b.sequence;
    }
  };

  EventId enqueue(SimTime at, Action action) {
    const EventId id = next_sequence_++;
    queue_.push_back(Entry{at, id, std::move(action)});
    pending_ids_.insert(id);
    std::push_heap(queue_.begin(), queue_.end(), Later{});
    return id;
  }

  SimTime now_{};
  EventId next_sequence_ = 0;
  std::uint64_t executed_ = 0;
  bool stop_requested_ = false;
  std::vector<Entry> queue_;
  std::unordered_set<EventId> cancelled_;
  std::unordered_set<EventId> pending_ids_;
  TraceHook trace_;
};

/// xoshiro256** keyed by (seed, stream_id).
///
/// The 256-bit state is filled with four consecutive splitmix64 outputs whose
/// starting value is mix64(seed) ^ mix64(stream_id ^ 0xA0761D6478BD642F).
/// Integer draws use Lemire's multiply-and-reject method, reals take the top
/// 53 bits. Nothing depends on the platform's <random> implementation.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {
    std::uint64_t sm = mix64(seed) ^ mix64(stream_id ^ 0xA0761D6478BD642FULL);
    for (auto& word : state_) word = splitmix64(sm);
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, bound). bound == 0 means the full 64-bit range.
  std::uint64_t below(std::uint64_t bound) noexcept {
    if (bound == 0) return next_u64();
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw RangeError("uniform_int: empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
    return static_cast<std::int64_t>(static_cast<std::uint64_t>(lo) + below(span));
  }

  /// Uniform real in [0, 1).
  double uniform01() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform_real(double lo, double hi) noexcept {
    const double u = uniform01();
    return lo * (1.0 - u) + hi * u;
  }

  bool bernoulli(double p) noexcept { return uniform01() < p; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  static constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  static constexpr std::uint64_t splitmix64(std::uint64_t& x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    return mix64(x);
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t state_[4]{};
};

}  // namespace netgym

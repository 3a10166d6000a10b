#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <mutex>
#include <queue>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "syncflow/node.hpp"

namespace syncflow {

using Clock = std::chrono::steady_clock;

enum class SyncMode { synchronized, asynchronous };

struct ClockMode {
  SyncMode mode = SyncMode::synchronized;
  double target_rtf = 0.0;  // 0 = unlimited

  /// Throws ConfigError: rtf must be finite and >= 0, and > 0 when
  /// asynchronous (timers need a wall-clock rate).
  void validate() const;
};

const char* to_string(SyncMode mode);
SyncMode parse_sync_mode(std::string_view s);

/// Paces simulated time against the wall clock.
class Throttle {
 public:
  explicit Throttle(ClockMode mode) : mode_(mode), origin_(Clock::now()) {}

  void restart() { origin_ = Clock::now(); }
  Clock::time_point origin() const noexcept { return origin_; }
  const ClockMode& mode() const noexcept { return mode_; }

  /// Blocks until wall-elapsed >= sim_time / target_rtf. Returns at once when
  /// target_rtf is 0 or the mode is asynchronous (timers pace those nodes).
  void wait(double sim_time) const;

 private:
  ClockMode mode_;
  Clock::time_point origin_;
};

/// Free-function form: one engine callback's worth of pacing.
void throttle(double engine_sim_time, const ClockMode& mode, Clock::time_point origin);

/// Receives envelopes for one consumer. Implementations serialize delivery
/// with their own buffer mutations.
class MessageSink {
 public:
  virtual ~MessageSink() = default;
  virtual void deliver(std::size_t input, Envelope env) = 0;
};

struct Subscription {
  MessageSink* sink = nullptr;
  std::size_t input = 0;
  double delay = 0.0;
};

struct ChannelEndpoint {
  std::string producer;  // "node/port"
  std::vector<Subscription> consumers;
};

struct TransportOptions {
  // Random sleep before each synchronized delivery, for neutrality tests.
  std::chrono::microseconds max_injected_latency{0};
  std::uint64_t latency_seed = 0;
};

/// Ordered, lossless fan-out channels inside one process.
///
/// Synchronized mode delivers immediately on the publishing thread; the
/// delay only shapes the consumer's expected counts. Asynchronous mode hands
/// delayed envelopes to a timer thread that delivers them delay / rtf wall
/// seconds later, preserving per-channel order.
class Transport {
 public:
  explicit Transport(ClockMode mode, TransportOptions options = {});
  ~Transport();

  Transport(const Transport&) = delete;
  Transport& operator=(const Transport&) = delete;

  std::size_t add_endpoint(std::string producer);
  std::size_t subscribe(std::size_t endpoint, MessageSink* sink, std::size_t input, double delay);
  void set_delay(std::size_t endpoint, std::size_t subscription, double delay);

  const ChannelEndpoint& endpoint(std::size_t id) const { return endpoints_.at(id); }
  std::size_t endpoint_count() const noexcept { return endpoints_.size(); }

  /// Non-blocking for the producer beyond synchronized delivery itself.
  /// Throws TransportViolation after shutdown().
  void publish(std::size_t endpoint, const Envelope& env);

  void open();
  /// Stops timed delivery and drops anything still in flight.
  void shutdown();
  bool is_open() const noexcept { return open_.load(); }

 private:
  struct Pending {
    Clock::time_point due;
    std::uint64_t order;
    MessageSink* sink;
    std::size_t input;
    Envelope env;
  };
  struct Later {
    bool operator()(const Pending& a, const Pending& b) const {
      if (a.due != b.due) return a.due > b.due;
      return a.order > b.order;
    }
  };

  void deliver_now(const Subscription& sub, const Envelope& env);
  void timer_loop();

  ClockMode mode_;
  TransportOptions options_;
  std::vector<ChannelEndpoint> endpoints_;
  std::atomic<bool> open_{false};

  std::mutex latency_mutex_;
  std::mt19937_64 latency_rng_;

  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::priority_queue<Pending, std::vector<Pending>, Later> queue_;
  std::uint64_t order_ = 0;
  bool timer_stop_ = false;
  std::thread timer_;
};

}  // namespace syncflow

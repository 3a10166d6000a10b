#include "syncflow/transport.hpp"

#include <cmath>
#include <string_view>

#include "syncflow/errors.hpp"

namespace syncflow {

void ClockMode::validate() const {
  if (!std::isfinite(target_rtf) || target_rtf < 0.0) {
    throw ConfigError("real-time factor must be finite and >= 0");
  }
  if (mode == SyncMode::asynchronous && target_rtf <= 0.0) {
    throw ConfigError("asynchronous mode needs a positive real-time factor");
  }
}

const char* to_string(SyncMode mode) {
  return mode == SyncMode::synchronized ? "sync" : "async";
}

SyncMode parse_sync_mode(std::string_view s) {
  if (s == "sync" || s == "synchronized") return SyncMode::synchronized;
  if (s == "async" || s == "asynchronous") return SyncMode::asynchronous;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected sync or async)");
}

void throttle(double engine_sim_time, const ClockMode& mode, Clock::time_point origin) {
  if (mode.mode != SyncMode::synchronized || mode.target_rtf <= 0.0) return;
  const auto wall = std::chrono::duration<double>(engine_sim_time / mode.target_rtf);
  std::this_thread::sleep_until(origin + std::chrono::duration_cast<Clock::duration>(wall));
}

void Throttle::wait(double sim_time) const { throttle(sim_time, mode_, origin_); }

Transport::Transport(ClockMode mode, TransportOptions options)
    : mode_(mode), options_(options), latency_rng_(options.latency_seed) {
  mode_.validate();
}

Transport::~Transport() { shutdown(); }

std::size_t Transport::add_endpoint(std::string producer) {
  endpoints_.push_back(ChannelEndpoint{std::move(producer), {}});
  return endpoints_.size() - 1;
}

std::size_t Transport::subscribe(std::size_t endpoint, MessageSink* sink, std::size_t input,
                                 double delay) {
  auto& ep = endpoints_.at(endpoint);
  ep.consumers.push_back(Subscription{sink, input, delay});
  return ep.consumers.size() - 1;
}

void Transport::set_delay(std::size_t endpoint, std::size_t subscription, double delay) {
  endpoints_.at(endpoint).consumers.at(subscription).delay = delay;
}

void Transport::open() {
  if (open_.exchange(true)) return;
  if (mode_.mode == SyncMode::asynchronous) {
    {
      std::lock_guard lock(queue_mutex_);
      timer_stop_ = false;
    }
    timer_ = std::thread([this] { timer_loop(); });
  }
}

void Transport::shutdown() {
  if (!open_.exchange(false)) return;
  {
    std::lock_guard lock(queue_mutex_);
    timer_stop_ = true;
    queue_ = {};
  }
  queue_cv_.notify_all();
  if (timer_.joinable()) timer_.join();
}

void Transport::deliver_now(const Subscription& sub, const Envelope& env) {
  if (options_.max_injected_latency.count() > 0) {
    std::int64_t us = 0;
    {
      std::lock_guard lock(latency_mutex_);
      us = std::uniform_int_distribution<std::int64_t>(0, options_.max_injected_latency.count())(
          latency_rng_);
    }
    std::this_thread::sleep_for(std::chrono::microseconds(us));
  }
  sub.sink->deliver(sub.input, env);
}

void Transport::publish(std::size_t endpoint, const Envelope& env) {
  if (!open_.load()) throw TransportViolation("publish after transport shutdown");
  const auto& ep = endpoints_.at(endpoint);
  for (const Subscription& sub : ep.consumers) {
    if (mode_.mode == SyncMode::asynchronous && sub.delay > 0.0) {
      const auto wall = std::chrono::duration<double>(sub.delay / mode_.target_rtf);
      {
        std::lock_guard lock(queue_mutex_);
        queue_.push(Pending{Clock::now() + std::chrono::duration_cast<Clock::duration>(wall),
                            order_++, sub.sink, sub.input, env});
      }
      queue_cv_.notify_one();
    } else {
      deliver_now(sub, env);
    }
  }
}

void Transport::timer_loop() {
  std::unique_lock lock(queue_mutex_);
  while (!timer_stop_) {
    if (queue_.empty()) {
      queue_cv_.wait(lock);
      continue;
    }
    const auto due = queue_.top().due;
    if (Clock::now() < due) {
      queue_cv_.wait_until(lock, due);
      continue;
    }
    Pending p = queue_.top();
    queue_.pop();
    lock.unlock();
    p.sink->deliver(p.input, std::move(p.env));
    lock.lock();
  }
}

}  // namespace syncflow

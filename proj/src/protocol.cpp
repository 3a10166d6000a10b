#include "syncflow/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace syncflow {

namespace {

std::int64_t to_ticks(double value, double resolution, const char* what) {
  const double scaled = std::round(value / resolution);
  if (!(scaled < 9.0e18)) {
    throw std::invalid_argument(std::string(what) + " out of range for tick grid");
  }
  return static_cast<std::int64_t>(scaled);
}

std::int64_t grid_scale(double resolution, const char* what) {
  if (!std::isfinite(resolution) || resolution <= 0.0 || resolution > 1.0) {
    throw std::invalid_argument(std::string("invalid ") + what + " resolution");
  }
  return static_cast<std::int64_t>(std::llround(1.0 / resolution));
}

i128 checked_mul(i128 a, i128 b) {
  i128 out = 0;
  if (__builtin_mul_overflow(a, b, &out)) {
    throw std::overflow_error("callback index overflows the tick grid");
  }
  return out;
}

}  // namespace

Rate::Rate(double hz) : hz_(hz) {
  if (!std::isfinite(hz) || hz <= 0.0) {
    throw std::invalid_argument("rate must be finite and > 0, got " + std::to_string(hz));
  }
}

void check_timing(const ChannelTiming& timing) {
  // Rate is validated on construction; only the delay is left.
  if (!std::isfinite(timing.delay) || timing.delay < 0.0) {
    throw std::invalid_argument("delay must be finite and >= 0, got " +
                                std::to_string(timing.delay));
  }
}

QuantizedTiming::QuantizedTiming(const ChannelTiming& timing, double epsilon, TickGrid grid)
    : cyclic_(timing.cyclic) {
  check_timing(timing);
  if (!std::isfinite(epsilon) || epsilon <= 0.0) {
    throw std::invalid_argument("epsilon must be > 0");
  }
  const std::int64_t rate_scale = grid_scale(grid.rate_resolution, "rate");
  const std::int64_t time_scale = grid_scale(grid.time_resolution, "time");

  fn_ = to_ticks(timing.consumer_rate.hz(), grid.rate_resolution, "consumer rate");
  fi_ = to_ticks(timing.producer_rate.hz(), grid.rate_resolution, "producer rate");
  delay_ = to_ticks(timing.delay, grid.time_resolution, "delay");
  if (fn_ < 1 || fi_ < 1) {
    throw std::invalid_argument("rate below the tick grid resolution");
  }

  const i128 sd = static_cast<i128>(rate_scale) * time_scale;
  den_ = fn_ * sd;
  step_ = fi_ * sd;
  offset_ = fn_ * fi_ * delay_;

  if (fn_ > fi_) {
    // floor((f_n - eps) / f_i) with eps expressed in millionths of a rate tick.
    constexpr i128 kSub = 1'000'000;
    const double eps_units = std::round(epsilon * static_cast<double>(rate_scale) * 1e6);
    const i128 eps = std::max<i128>(1, static_cast<i128>(std::min(eps_units, 1e30)));
    shift_ = static_cast<std::int64_t>(floor_div(fn_ * kSub - eps, fi_ * kSub));
  } else {
    shift_ = -1;
  }
}

i128 QuantizedTiming::scaled_k(std::uint64_t k) const {
  if (k > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
    throw std::overflow_error("callback index exceeds 63 bits");
  }
  return checked_mul(step_, static_cast<i128>(k));
}

i128 QuantizedTiming::count_before(i128 j) const {
  return floor_div(checked_mul(step_, j) - offset_, den_);
}

ExpectedCount QuantizedTiming::acyclic(std::uint64_t k) const {
  if (k == 0) return {1};
  const i128 kk = static_cast<i128>(k);
  const i128 prev = count_before(kk - 1);
  const i128 curr = count_before(kk);
  const i128 delta = curr - prev;
  const i128 correction = floor_div(scaled_k(k) - den_ * delta - offset_, den_);
  const i128 out = delta - std::min<i128>(delta, std::max<i128>(0, -correction));
  return {static_cast<std::uint64_t>(out)};
}

ExpectedCount QuantizedTiming::cyclic(std::uint64_t k) const {
  if (k == 0) return {0};
  const i128 kk = static_cast<i128>(k) + shift_;
  const i128 prev = count_before(kk - 1);
  const i128 curr = count_before(kk);
  const i128 delta = curr - prev;
  const i128 correction = floor_div(scaled_k(k) - den_ * (delta - 1) - offset_, den_);
  const i128 out = delta - std::min<i128>(delta, std::max<i128>(0, -correction));
  return {static_cast<std::uint64_t>(out)};
}

ExpectedCount expected_count_acyclic(std::uint64_t k, const ChannelTiming& timing,
                                     TickGrid grid) {
  if (timing.cyclic) {
    throw std::invalid_argument("expected_count_acyclic called on a cyclic channel");
  }
  return QuantizedTiming(timing, kDefaultEpsilon, grid).acyclic(k);
}

ExpectedCount expected_count_cyclic(std::uint64_t k, const ChannelTiming& timing,
                                    double epsilon, TickGrid grid) {
  if (!timing.cyclic) {
    throw std::invalid_argument("expected_count_cyclic called on an acyclic channel");
  }
  return QuantizedTiming(timing, epsilon, grid).cyclic(k);
}

std::uint64_t callbacks_within(std::uint64_t steps, double reference_hz, double node_hz,
                               TickGrid grid) {
  const i128 fr = to_ticks(Rate(reference_hz).hz(), grid.rate_resolution, "reference rate");
  const i128 fn = to_ticks(Rate(node_hz).hz(), grid.rate_resolution, "node rate");
  if (fr < 1 || fn < 1) throw std::invalid_argument("rate below the tick grid resolution");
  return static_cast<std::uint64_t>(floor_div(checked_mul(steps, fn), fr)) + 1;
}

}  // namespace syncflow

#pragma once

// Expected-message-count rules for rate/delay synchronized channels.
//
// A consumer node firing at f_n on a channel fed at f_i with delay tau must
// hold delta messages before callback k may run. All arithmetic is carried
// out on an integer grid (rates in units of `TickGrid::rate_resolution`,
// delays in units of `TickGrid::time_resolution`) so every floor division is
// exact and boundary coincidences resolve reproducibly.

#include <cstdint>

namespace syncflow {

__extension__ typedef __int128 i128;

/// Strictly positive, finite frequency in Hz of simulated time.
class Rate {
 public:
  explicit Rate(double hz);

  double hz() const noexcept { return hz_; }
  double period() const noexcept { return 1.0 / hz_; }

  friend bool operator==(const Rate&, const Rate&) = default;

 private:
  double hz_;
};

struct ChannelTiming {
  Rate consumer_rate;
  Rate producer_rate;
  double delay = 0.0;  // seconds of simulated time
  bool cyclic = false;
};

struct ExpectedCount {
  std::uint64_t delta = 0;
  friend bool operator==(const ExpectedCount&, const ExpectedCount&) = default;
};

struct TickGrid {
  double rate_resolution = 1e-6;  // Hz
  double time_resolution = 1e-6;  // s
};

inline constexpr double kDefaultEpsilon = 1e-9;

/// Floor division toward negative infinity.
constexpr i128 floor_div(i128 num, i128 den) noexcept {
  i128 q = num / den;
  if ((num % den != 0) && ((num < 0) != (den < 0))) --q;
  return q;
}

/// A channel's timing rescaled onto the integer grid. Construct once per
/// channel and query per callback index; the queries are pure.
class QuantizedTiming {
 public:
  explicit QuantizedTiming(const ChannelTiming& timing,
                           double epsilon = kDefaultEpsilon,
                           TickGrid grid = {});

  ExpectedCount expected(std::uint64_t k) const {
    return cyclic_ ? cyclic(k) : acyclic(k);
  }
  ExpectedCount acyclic(std::uint64_t k) const;
  ExpectedCount cyclic(std::uint64_t k) const;

  bool is_cyclic() const noexcept { return cyclic_; }
  std::int64_t consumer_ticks() const noexcept { return static_cast<std::int64_t>(fn_); }
  std::int64_t producer_ticks() const noexcept { return static_cast<std::int64_t>(fi_); }
  std::int64_t delay_ticks() const noexcept { return static_cast<std::int64_t>(delay_); }
  std::int64_t shift() const noexcept { return shift_; }

 private:
  // floor((f_i j - f_n f_i tau) / f_n) in grid units.
  i128 count_before(i128 j) const;
  i128 scaled_k(std::uint64_t k) const;

  i128 fn_;
  i128 fi_;
  i128 delay_;
  i128 den_;     // f_n expressed over the common denominator
  i128 step_;    // f_i expressed over the common denominator
  i128 offset_;  // f_n f_i tau expressed over the common denominator
  std::int64_t shift_;
  bool cyclic_;
};

/// Messages to consume between callback k-1 and k on an acyclic channel.
/// Returns 1 at k = 0 regardless of delay.
ExpectedCount expected_count_acyclic(std::uint64_t k, const ChannelTiming& timing,
                                     TickGrid grid = {});

/// Same for a cycle-breaking channel: 0 at k = 0, then counts as if the
/// callback index were shifted so one node of the cycle can fire first.
ExpectedCount expected_count_cyclic(std::uint64_t k, const ChannelTiming& timing,
                                    double epsilon = kDefaultEpsilon,
                                    TickGrid grid = {});

/// Callbacks a node at `node_hz` runs with t_k <= steps / reference_hz,
/// i.e. floor(steps * f_node / f_ref) + 1, computed on the rate grid.
std::uint64_t callbacks_within(std::uint64_t steps, double reference_hz, double node_hz,
                               TickGrid grid = {});

/// Validates a timing; throws std::invalid_argument.
void check_timing(const ChannelTiming& timing);

}  // namespace syncflow

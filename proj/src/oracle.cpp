#include "syncflow/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace syncflow {

namespace {

enum class EventKind : int { arrival = 0, callback = 1 };  // arrivals sort first on ties

struct Event {
  i128 time;
  EventKind kind;
  std::int64_t index;  // message number or callback index
};

struct Timeline {
  // Exact times over the common denominator f_i * f_n * (time grid).
  i128 rate_scale;
  i128 time_scale;
  i128 fn;
  i128 fi;
  i128 delay;

  i128 arrival(std::int64_t m) const { return m * rate_scale * fn * time_scale + delay * fi * fn; }
  i128 callback(std::int64_t j) const { return j * rate_scale * fi * time_scale; }
  i128 producer_period() const { return rate_scale * fn * time_scale; }
};

}  // namespace

std::vector<std::uint64_t> oracle_expected_schedule(const ChannelTiming& timing,
                                                    std::uint64_t k_max, TickGrid grid) {
  check_timing(timing);
  if (k_max < 1) throw std::invalid_argument("k_max must be >= 1");

  Timeline tl{};
  tl.rate_scale = std::llround(1.0 / grid.rate_resolution);
  tl.time_scale = std::llround(1.0 / grid.time_resolution);
  tl.fn = std::llround(timing.consumer_rate.hz() / grid.rate_resolution);
  tl.fi = std::llround(timing.producer_rate.hz() / grid.rate_resolution);
  tl.delay = std::llround(timing.delay / grid.time_resolution);
  if (tl.fn < 1 || tl.fi < 1) throw std::invalid_argument("rate below grid resolution");

  // Shift for cyclic channels: consumer callbacks falling strictly inside the
  // first producer period, or one callback back if the consumer is not faster.
  std::int64_t shift = -1;
  if (timing.cyclic && tl.fn > tl.fi) {
    shift = 0;
    while (tl.callback(shift + 1) < tl.producer_period()) ++shift;
  }

  const auto kmax = static_cast<std::int64_t>(k_max);
  const std::int64_t j_lo = std::min<std::int64_t>(shift - 1, 0) - 1;
  const std::int64_t j_hi = kmax + std::max<std::int64_t>(shift, 0);

  // Generous message range; the sweep itself decides what counts.
  const double fi_hz = static_cast<double>(tl.fi) * grid.rate_resolution;
  const double fn_hz = static_cast<double>(tl.fn) * grid.rate_resolution;
  const double tau = static_cast<double>(tl.delay) * grid.time_resolution;
  const auto m_lo = static_cast<std::int64_t>(std::floor((j_lo / fn_hz - tau) * fi_hz)) - 2;
  const auto m_hi = static_cast<std::int64_t>(std::ceil((j_hi / fn_hz - tau) * fi_hz)) + 2;

  std::vector<Event> events;
  events.reserve(static_cast<std::size_t>(std::max<std::int64_t>(0, m_hi - m_lo + 1) +
                                          (j_hi - j_lo + 1)));
  for (std::int64_t m = m_lo; m <= m_hi; ++m) {
    events.push_back({tl.arrival(m), EventKind::arrival, m});
  }
  for (std::int64_t j = j_lo; j <= j_hi; ++j) {
    events.push_back({tl.callback(j), EventKind::callback, j});
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.time != b.time) return a.time < b.time;
    return static_cast<int>(a.kind) < static_cast<int>(b.kind);
  });

  // Cumulative arrivals at each callback instant: all messages on the periodic
  // timeline, and only the ones actually produced (m >= 0).
  std::map<std::int64_t, std::int64_t> upto_all;
  std::map<std::int64_t, std::int64_t> upto_real;
  std::int64_t seen_all = 0;
  std::int64_t seen_real = 0;
  for (const Event& e : events) {
    if (e.kind == EventKind::arrival) {
      ++seen_all;
      if (e.index >= 0) ++seen_real;
    } else {
      upto_all[e.index] = seen_all;
      upto_real[e.index] = seen_real;
    }
  }

  std::vector<std::uint64_t> out(k_max + 1, 0);
  if (!timing.cyclic) {
    auto consumed_by = [&](std::int64_t j) { return std::max<std::int64_t>(1, upto_real.at(j)); };
    out[0] = 1;
    for (std::int64_t k = 1; k <= kmax; ++k) {
      out[static_cast<std::size_t>(k)] =
          static_cast<std::uint64_t>(consumed_by(k) - consumed_by(k - 1));
    }
  } else {
    out[0] = 0;
    for (std::int64_t k = 1; k <= kmax; ++k) {
      const std::int64_t window = upto_all.at(k + shift) - upto_all.at(k - 1 + shift);
      const std::int64_t arrived = upto_real.at(k);
      out[static_cast<std::size_t>(k)] = static_cast<std::uint64_t>(std::min(window, arrived));
    }
  }
  return out;
}

}  // namespace syncflow

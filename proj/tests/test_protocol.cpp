#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "syncflow/oracle.hpp"
#include "syncflow/protocol.hpp"

using namespace syncflow;

namespace {

// Messages from an integer-rate producer that have arrived by consumer tick k,
// with the delay in whole microseconds. Exact rational comparison:
//   m / fi + tau <= k / fn   <=>   m fn 1e6 + tau_us fi fn <= k fi 1e6
std::int64_t arrived_by(std::int64_t k, std::int64_t fn, std::int64_t fi, std::int64_t tau_us) {
  const std::int64_t num = k * fi * 1'000'000 - tau_us * fi * fn;
  if (num < 0) return 0;
  return num / (fn * 1'000'000) + 1;
}

std::vector<std::uint64_t> brute_acyclic(std::int64_t fn, std::int64_t fi, std::int64_t tau_us, std::int64_t kmax) {
  std::vector<std::uint64_t> out;
  std::int64_t prev = 0;
  for (std::int64_t k = 0; k <= kmax; ++k) {
    const std::int64_t c = std::max<std::int64_t>(1, arrived_by(k, fn, fi, tau_us));
    out.push_back(static_cast<std::uint64_t>(c - prev));
    prev = c;
  }
  return out;
}

ChannelTiming timing(double fn, double fi, double tau, bool cyclic = false) {
  return ChannelTiming{Rate(fn), Rate(fi), tau, cyclic};
}

}  // namespace

TEST(ExpectedCountAcyclic, FirstCallbackTakesOne) {
  EXPECT_EQ(expected_count_acyclic(0, timing(20, 60, 0)).delta, 1u);
}

TEST(ExpectedCountAcyclic, EqualRatesZeroDelay) {
  EXPECT_EQ(expected_count_acyclic(1, timing(10, 10, 0)).delta, 1u);
}

TEST(ExpectedCountAcyclic, FastProducer) {
  const auto want = brute_acyclic(20, 60, 0, 1);
  EXPECT_EQ(want[1], 3u);
  EXPECT_EQ(expected_count_acyclic(1, timing(20, 60, 0)).delta, want[1]);
}

TEST(ExpectedCountAcyclic, DelayedMessagesStillInFlight) {
  const auto want = brute_acyclic(20, 60, 100'000, 1);
  EXPECT_EQ(want[1], 0u);
  EXPECT_EQ(expected_count_acyclic(1, timing(20, 60, 0.1)).delta, want[1]);
}

TEST(ExpectedCountAcyclic, MatchesExactRationalCounterOnIntegerRates) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::int64_t> rate(1, 500);
  for (int c = 0; c < 1000; ++c) {
    const std::int64_t fn = rate(rng);
    const std::int64_t fi = rate(rng);
    const std::int64_t tau_us = std::uniform_int_distribution<std::int64_t>(0, 3'000'000 / fi)(rng);
    const auto want = brute_acyclic(fn, fi, tau_us, 100);
    const auto t = timing(static_cast<double>(fn), static_cast<double>(fi), tau_us * 1e-6);
    for (std::uint64_t k = 0; k <= 100; ++k) {
      ASSERT_EQ(expected_count_acyclic(k, t).delta, want[k])
          << "fn=" << fn << " fi=" << fi << " tau_us=" << tau_us << " k=" << k;
    }
  }
}

TEST(ExpectedCountAcyclic, ArrivalExactlyAtCallbackCounts) {
  // 40 Hz producer, 0.025 s delay: message 1 lands exactly on the 20 Hz tick 1.
  const auto want = brute_acyclic(20, 40, 25'000, 3);
  for (std::uint64_t k = 0; k <= 3; ++k) EXPECT_EQ(expected_count_acyclic(k, timing(20, 40, 0.025)).delta, want[k]);
}

TEST(ExpectedCountCyclic, FirstCallbackTakesNothing) {
  EXPECT_EQ(expected_count_cyclic(0, timing(30, 30, 0, true)).delta, 0u);
  EXPECT_EQ(expected_count_cyclic(0, timing(7.5, 213, 0.04, true)).delta, 0u);
}

TEST(ExpectedCountCyclic, EqualRates) {
  EXPECT_EQ(expected_count_cyclic(1, timing(30, 30, 0, true)).delta, 1u);
}

TEST(ExpectedCountCyclic, FastConsumerAlternates) {
  const auto t = timing(60, 30, 0, true);
  EXPECT_EQ(expected_count_cyclic(1, t).delta, 1u);
  EXPECT_EQ(expected_count_cyclic(2, t).delta, 0u);
  const auto oracle = oracle_expected_schedule(t, 2);
  EXPECT_EQ(oracle[1], 1u);
  EXPECT_EQ(oracle[2], 0u);
}

TEST(OracleSchedule, OneToOne) {
  EXPECT_EQ(oracle_expected_schedule(timing(10, 10, 0), 3), (std::vector<std::uint64_t>{1, 1, 1, 1}));
}

TEST(OracleSchedule, FastProducer) {
  EXPECT_EQ(oracle_expected_schedule(timing(20, 60, 0), 2), (std::vector<std::uint64_t>{1, 3, 3}));
}

TEST(OracleSchedule, DelayedMatchesFormula) {
  const auto t = timing(20, 60, 0.1);
  const auto oracle = oracle_expected_schedule(t, 3);
  for (std::uint64_t k = 0; k <= 3; ++k) EXPECT_EQ(oracle[k], expected_count_acyclic(k, t).delta) << k;
}

TEST(OracleSchedule, AgreesWithExactCounter) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::int64_t> rate(1, 300);
  for (int c = 0; c < 300; ++c) {
    const std::int64_t fn = rate(rng), fi = rate(rng);
    const std::int64_t tau_us = std::uniform_int_distribution<std::int64_t>(0, 200'000)(rng);
    EXPECT_EQ(oracle_expected_schedule(timing(double(fn), double(fi), tau_us * 1e-6), 60),
              brute_acyclic(fn, fi, tau_us, 60));
  }
}

namespace {

struct RandomTiming {
  std::mt19937_64 rng;
  explicit RandomTiming(std::uint64_t seed) : rng(seed) {}

  double rate() {
    if (std::bernoulli_distribution(0.3)(rng)) return double(std::uniform_int_distribution<int>(1, 500)(rng));
    return std::round(std::uniform_real_distribution<double>(0.5, 500.0)(rng) * 1000.0) / 1000.0;
  }
  ChannelTiming next(bool cyclic) {
    ChannelTiming t{Rate(rate()), Rate(rate()), 0.0, cyclic};
    const double max_tau = 3.0 / t.producer_rate.hz();
    if (std::bernoulli_distribution(0.2)(rng)) {
      t.delay = std::round(std::uniform_int_distribution<int>(0, 3)(rng) / t.producer_rate.hz() * 1e6) / 1e6;
      t.delay = std::min(t.delay, max_tau);
    } else {
      t.delay = std::round(std::uniform_real_distribution<double>(0.0, max_tau)(rng) * 1e6) / 1e6;
    }
    return t;
  }
};

}  // namespace

class OracleEquivalence : public ::testing::TestWithParam<bool> {};

TEST_P(OracleEquivalence, FormulaMatchesTimeline) {
  const bool cyclic = GetParam();
  RandomTiming gen(cyclic ? 101 : 100);
  for (int c = 0; c < 1000; ++c) {
    const ChannelTiming t = gen.next(cyclic);
    const auto oracle = oracle_expected_schedule(t, 100);
    for (std::uint64_t k = 0; k <= 100; ++k) {
      const auto got = cyclic ? expected_count_cyclic(k, t) : expected_count_acyclic(k, t);
      ASSERT_EQ(got.delta, oracle[k]) << "fn=" << t.consumer_rate.hz() << " fi=" << t.producer_rate.hz()
                                      << " tau=" << t.delay << " k=" << k;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Channels, OracleEquivalence, ::testing::Values(false, true),
                         [](const auto& info) { return info.param ? "cyclic" : "acyclic"; });

TEST(ExpectedCountProperties, CumulativeTracksArrivalCount) {
  RandomTiming gen(5);
  for (int c = 0; c < 1000; ++c) {
    const ChannelTiming t = gen.next(false);
    const double fn = t.consumer_rate.hz(), fi = t.producer_rate.hz();
    std::uint64_t sum = 0, prev = 0;
    for (std::uint64_t k = 0; k <= 100; ++k) {
      sum += expected_count_acyclic(k, t).delta;
      ASSERT_GE(sum, prev);
      prev = sum;
      const double ref = 1.0 + std::max(0.0, std::floor(fi * double(k) / fn - fi * t.delay));
      ASSERT_LE(std::abs(double(sum) - ref), 1.0) << "k=" << k;
    }
  }
}

TEST(ExpectedCountProperties, BootstrapCounts) {
  RandomTiming gen(6);
  for (int c = 0; c < 500; ++c) {
    EXPECT_EQ(expected_count_acyclic(0, gen.next(false)).delta, 1u);
    EXPECT_EQ(expected_count_cyclic(0, gen.next(true)).delta, 0u);
  }
}

TEST(ExpectedCountProperties, Pure) {
  RandomTiming gen(8);
  for (int c = 0; c < 200; ++c) {
    const ChannelTiming t = gen.next(c % 2 == 1);
    for (std::uint64_t k = 0; k < 50; ++k) {
      const auto a = t.cyclic ? expected_count_cyclic(k, t) : expected_count_acyclic(k, t);
      const auto b = t.cyclic ? expected_count_cyclic(k, t) : expected_count_acyclic(k, t);
      ASSERT_EQ(a, b);
    }
  }
}

TEST(ExpectedCountProperties, CyclicStaysWithinOneProducerPeriodOfAcyclic) {
  // The cyclic schedule is the acyclic one shifted by about one callback, so
  // the cumulative counts never drift apart by more than one callback's worth.
  RandomTiming gen(9);
  for (int c = 0; c < 1000; ++c) {
    const ChannelTiming t = gen.next(true);
    const ChannelTiming plain{t.consumer_rate, t.producer_rate, t.delay, false};
    const double bound = std::ceil(t.producer_rate.hz() / t.consumer_rate.hz()) + 1.0;
    std::int64_t cyc = 0, acyc = 0;
    for (std::uint64_t k = 0; k <= 100; ++k) {
      cyc += expected_count_cyclic(k, t).delta;
      acyc += expected_count_acyclic(k, plain).delta;
      ASSERT_LE(std::abs(double(cyc - acyc)), bound)
          << "k=" << k << " fn=" << t.consumer_rate.hz() << " fi=" << t.producer_rate.hz() << " tau=" << t.delay;
    }
  }
}

TEST(Timing, RejectsInvalid) {
  EXPECT_THROW(Rate(0.0), std::invalid_argument);
  EXPECT_THROW(Rate(-3.0), std::invalid_argument);
  EXPECT_THROW(Rate(std::nan("")), std::invalid_argument);
  EXPECT_THROW(check_timing(timing(10, 10, -0.1)), std::invalid_argument);
  EXPECT_THROW(check_timing(timing(10, 10, INFINITY)), std::invalid_argument);
}

TEST(CallbacksWithin, CountsTicksUpToHorizon) {
  EXPECT_EQ(callbacks_within(40, 20, 20), 41u);
  EXPECT_EQ(callbacks_within(40, 20, 30), 61u);
  EXPECT_EQ(callbacks_within(40, 20, 60), 121u);
  EXPECT_EQ(callbacks_within(40, 20, 15), 31u);
  EXPECT_EQ(callbacks_within(1, 30, 7), 1u);
}

#include <gtest/gtest.h>

#include <mutex>
#include <thread>

#include "syncflow/errors.hpp"
#include "syncflow/node.hpp"
#include "syncflow/params.hpp"
#include "syncflow/transport.hpp"

using namespace syncflow;
using namespace std::chrono;

namespace {

struct CollectingSink : MessageSink {
  std::mutex m;
  std::vector<std::pair<std::size_t, Envelope>> got;
  std::vector<Clock::time_point> at;
  void deliver(std::size_t input, Envelope env) override {
    std::lock_guard lock(m);
    got.emplace_back(input, std::move(env));
    at.push_back(Clock::now());
  }
  std::size_t size() {
    std::lock_guard lock(m);
    return got.size();
  }
};

Envelope env(std::uint64_t seq, double v = 0.0) { return Envelope{Payload::Constant(1, v), seq, 0.0}; }

ClockMode sync_mode(double rtf = 0.0) { return ClockMode{SyncMode::synchronized, rtf}; }
ClockMode async_mode(double rtf) { return ClockMode{SyncMode::asynchronous, rtf}; }

}  // namespace

TEST(Transport, FanOutPreservesOrder) {
  Transport t(sync_mode());
  CollectingSink a, b;
  const auto ep = t.add_endpoint("p/y");
  t.subscribe(ep, &a, 0, 0.0);
  t.subscribe(ep, &b, 2, 0.0);
  t.open();
  for (std::uint64_t s = 0; s < 3; ++s) t.publish(ep, env(s));
  for (auto* sink : {&a, &b}) {
    ASSERT_EQ(sink->got.size(), 3u);
    for (std::uint64_t s = 0; s < 3; ++s) EXPECT_EQ(sink->got[s].second.seq, s);
  }
  EXPECT_EQ(b.got[0].first, 2u);
}

TEST(Transport, SyncDelayOnlyGates) {
  Transport t(sync_mode(1.0));
  NodeSpec spec;
  spec.name = "c";
  spec.rate = 20;
  spec.inputs = {ChannelSpec{"x", "p/y", 60, 0.1, 1, false, 1}};
  spec.outputs = {OutputSpec{"y", 1}};
  struct Sink : MessageSink {
    NodeRuntime* node;
    void deliver(std::size_t i, Envelope e) override { node->on_message(i, std::move(e)); }
  } sink;
  NodeRuntime node(spec, std::make_unique<FunctionBehavior>([](const CallbackContext&) {
                     return std::vector<Payload>{Payload::Zero(1)};
                   }));
  sink.node = &node;
  node.reset({});
  const auto ep = t.add_endpoint("p/y");
  t.subscribe(ep, &sink, 0, 0.1);
  t.open();
  const auto before = Clock::now();
  t.publish(ep, env(0));
  EXPECT_LT(Clock::now() - before, milliseconds(50));
  EXPECT_EQ(node.buffered(0), 1u);  // delivered on the spot
  ASSERT_TRUE(node.try_fire());
  EXPECT_EQ(node.expected(0), 0u);  // k = 1: everything still "in flight"
  t.publish(ep, env(1));
  auto f = node.try_fire();
  ASSERT_TRUE(f);
  EXPECT_TRUE(f->consumed[0].empty());
}

TEST(Transport, AsyncDelayIsWallClock) {
  for (double rtf : {1.0, 4.0}) {
    Transport t(async_mode(rtf));
    CollectingSink s;
    const auto ep = t.add_endpoint("p/y");
    t.subscribe(ep, &s, 0, 0.1);
    t.open();
    const auto sent = Clock::now();
    t.publish(ep, env(0));
    EXPECT_EQ(s.size(), 0u);
    while (s.size() == 0 && Clock::now() - sent < seconds(2)) std::this_thread::sleep_for(milliseconds(1));
    ASSERT_EQ(s.size(), 1u);
    const double waited = duration<double>(s.at[0] - sent).count();
    EXPECT_GE(waited, 0.1 / rtf);
    EXPECT_LT(waited, 0.1 / rtf + 0.05) << "rtf " << rtf;
    t.shutdown();
  }
}

TEST(Transport, AsyncZeroDelayIsImmediate) {
  Transport t(async_mode(2.0));
  CollectingSink s;
  const auto ep = t.add_endpoint("p/y");
  t.subscribe(ep, &s, 0, 0.0);
  t.open();
  t.publish(ep, env(0));
  EXPECT_EQ(s.size(), 1u);
}

TEST(Transport, ShutdownDropsInFlightAndRejectsPublish) {
  Transport t(async_mode(1.0));
  CollectingSink s;
  const auto ep = t.add_endpoint("p/y");
  t.subscribe(ep, &s, 0, 5.0);
  t.open();
  t.publish(ep, env(0));
  t.shutdown();
  EXPECT_EQ(s.size(), 0u);
  EXPECT_THROW(t.publish(ep, env(1)), TransportViolation);
}

namespace {

void stress(ClockMode mode, double delay) {
  constexpr int kProducers = 8;
  constexpr std::uint64_t kPerProducer = 12'500;
  Transport t(mode);
  CollectingSink a, b;
  std::vector<std::size_t> eps;
  for (int p = 0; p < kProducers; ++p) {
    eps.push_back(t.add_endpoint("p" + std::to_string(p) + "/y"));
    t.subscribe(eps.back(), &a, p, delay);
    t.subscribe(eps.back(), &b, p, delay);
  }
  t.open();
  std::vector<std::thread> threads;
  for (int p = 0; p < kProducers; ++p) {
    threads.emplace_back([&, p] {
      for (std::uint64_t s = 0; s < kPerProducer; ++s) t.publish(eps[p], env(s, p));
    });
  }
  for (auto& th : threads) th.join();
  const auto deadline = Clock::now() + seconds(20);
  while ((a.size() < kProducers * kPerProducer || b.size() < kProducers * kPerProducer) && Clock::now() < deadline) {
    std::this_thread::sleep_for(milliseconds(5));
  }
  t.shutdown();
  for (CollectingSink* sink : {&a, &b}) {
    ASSERT_EQ(sink->got.size(), kProducers * kPerProducer);
    std::vector<std::uint64_t> next(kProducers, 0);
    for (const auto& [input, e] : sink->got) {
      ASSERT_EQ(e.seq, next[input]) << "producer " << input;
      ASSERT_EQ(e.payload(0), double(input));
      ++next[input];
    }
    for (int p = 0; p < kProducers; ++p) EXPECT_EQ(next[p], kPerProducer);
  }
}

}  // namespace

TEST(TransportStress, SyncExactlyOnceInOrder) { stress(sync_mode(), 0.0); }

TEST(TransportStress, AsyncDelayedExactlyOnceInOrder) { stress(async_mode(32.0), 0.01); }

TEST(Throttle, UnlimitedAddsNothing) {
  Throttle th(sync_mode(0.0));
  const auto t0 = Clock::now();
  th.wait(100.0);
  EXPECT_LT(Clock::now() - t0, milliseconds(20));
}

TEST(Throttle, PacesToRealTimeFactor) {
  for (double rtf : {1.0, 5.0}) {
    Throttle th(sync_mode(rtf));
    const auto t0 = Clock::now();
    th.wait(1.0);
    const double wall = duration<double>(Clock::now() - t0).count();
    EXPECT_GE(wall, 1.0 / rtf);
    EXPECT_LT(wall, 1.1 / rtf) << rtf;
  }
}

TEST(Throttle, AsyncDoesNotBlock) {
  Throttle th(async_mode(1.0));
  const auto t0 = Clock::now();
  th.wait(10.0);
  EXPECT_LT(Clock::now() - t0, milliseconds(20));
}

TEST(ClockMode, Validation) {
  EXPECT_NO_THROW(sync_mode(0.0).validate());
  EXPECT_THROW(sync_mode(-1.0).validate(), ConfigError);
  EXPECT_THROW(sync_mode(INFINITY).validate(), ConfigError);
  EXPECT_THROW(async_mode(0.0).validate(), ConfigError);
  EXPECT_EQ(parse_sync_mode("async"), SyncMode::asynchronous);
  EXPECT_EQ(parse_sync_mode("synchronized"), SyncMode::synchronized);
  EXPECT_THROW(parse_sync_mode("lockstep"), ConfigError);
}

TEST(ParameterStore, SetThenGet) {
  ParameterStore p;
  p.set("pendulum/mass", 0.033);
  EXPECT_EQ(p.get_as<double>("pendulum/mass"), 0.033);
  EXPECT_FALSE(p.get("pendulum/length"));
  EXPECT_THROW(p.get_as<std::string>("pendulum/mass"), ParamTypeError);
  EXPECT_THROW(p.set("bad key", 1.0), std::invalid_argument);
}

TEST(ParameterStore, ConcurrentWritersGiveOneOrder) {
  ParameterStore p;
  p.set("shared/x", 0.0);
  const std::uint64_t first_version = p.get("shared/x")->version;
  constexpr int kWrites = 2000;
  std::atomic<bool> go{false};
  auto writer = [&](double sign) {
    while (!go) {
    }
    for (int i = 1; i <= kWrites; ++i) p.set("shared/x", sign * i);
  };
  std::vector<std::vector<std::pair<std::uint64_t, double>>> seen(2);
  auto reader = [&](int r) {
    while (!go) {
    }
    for (int i = 0; i < 4000; ++i) {
      auto e = p.get("shared/x");
      seen[r].emplace_back(e->version, std::get<double>(e->value));
    }
  };
  std::thread w1(writer, 1.0), w2(writer, -1.0), r1(reader, 0), r2(reader, 1);
  go = true;
  w1.join();
  w2.join();
  r1.join();
  r2.join();
  std::map<std::uint64_t, double> order;
  for (const auto& obs : seen) {
    for (std::size_t i = 1; i < obs.size(); ++i) ASSERT_GE(obs[i].first, obs[i - 1].first);
    for (const auto& [v, x] : obs) {
      auto [it, inserted] = order.emplace(v, x);
      ASSERT_EQ(it->second, x) << "version " << v << " seen with two values";
    }
  }
  EXPECT_EQ(p.get("shared/x")->version - first_version, 2u * kWrites);
}

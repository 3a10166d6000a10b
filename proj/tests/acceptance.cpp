// Prints one PASS/FAIL line per acceptance criterion; exit status 1 if any fail.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <mutex>
#include <numbers>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "syncflow/demo.hpp"
#include "syncflow/engines.hpp"
#include "syncflow/environment.hpp"
#include "syncflow/harness.hpp"
#include "syncflow/oracle.hpp"
#include "syncflow/pendulum.hpp"
#include "syncflow/policies.hpp"
#include "syncflow/transport.hpp"

using namespace syncflow;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double limit_seconds, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_seconds > 0.0 && secs >= limit_seconds) {
    o.pass = false;
    o.detail += "; over the " + std::to_string(static_cast<int>(limit_seconds)) + " s budget";
  }
  if (!o.pass) ++failures;
  std::printf("%s [%d] %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome conformance() {
  const auto r = run_conformance(0, 1000);
  return {r.ok() && r.acyclic_pass == 1000 && r.cyclic_pass == 1000,
          fmt("acyclic %llu/1000, cyclic %llu/1000, loops %llu/1000%s", (unsigned long long)r.acyclic_pass,
              (unsigned long long)r.cyclic_pass, (unsigned long long)r.live_pass,
              r.counterexample ? ("; " + *r.counterexample).c_str() : "")};
}

Outcome sync_determinism() {
  ExperimentConfig c;
  c.target_rtf = {1.0, 5.0, 0.0};
  c.runs = 5;
  const auto rows = run_variance_sweep(c);
  bool ok = rows.size() == 15;
  for (const auto& r : rows) {
    ok = ok && r.variance == 0.0 && r.episode_hash == rows[0].episode_hash && r.sin_theta == rows[0].sin_theta;
  }
  return {ok, fmt("%zu episodes, variance 0 in every setting, one hash %016llx: %s", rows.size(),
                  rows.empty() ? 0ULL : (unsigned long long)rows[0].episode_hash, ok ? "yes" : "no")};
}

Outcome async_degradation() {
  ExperimentConfig c;
  c.mode = SyncMode::asynchronous;
  c.target_rtf = {16.0};
  c.runs = 5;
  int positive = 0;
  std::string vars;
  for (int sweep = 0; sweep < 5; ++sweep) {
    c.seed = static_cast<std::uint64_t>(sweep);
    const auto rows = run_variance_sweep(c);
    const double v = rows.at(0).variance;
    positive += v > 0.0;
    vars += fmt("%s%.3g", sweep ? " " : "", v);
  }
  return {positive >= 4, fmt("variance > 0 in %d/5 sweeps (%s)", positive, vars.c_str())};
}

Outcome delay_speedup() {
  const auto r = run_delay_speedup(ExperimentConfig{});
  return {r.ratio() >= 1.2,
          fmt("realized rtf %.2f without delay, %.2f with one period of delay, ratio %.2f (need >= 1.20)",
              r.baseline_rtf, r.delayed_rtf, r.ratio())};
}

Outcome liveness() {
  const auto r = run_liveness(0, 200, 100, Driver::threaded);
  return {r.finished == 200, fmt("%llu/200 graphs finished%s", (unsigned long long)r.finished,
                                 r.first_failure ? ("; " + *r.first_failure).c_str() : "")};
}

class Recorder : public MessageSink {
 public:
  void deliver(std::size_t input, Envelope env) override {
    std::lock_guard lock(mutex_);
    got_.emplace_back(input, env.seq);
  }
  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return got_.size();
  }
  std::vector<std::pair<std::size_t, std::uint64_t>> take() {
    std::lock_guard lock(mutex_);
    return got_;
  }

 private:
  mutable std::mutex mutex_;
  std::vector<std::pair<std::size_t, std::uint64_t>> got_;
};

Outcome transport_stress() {
  constexpr std::size_t kProducers = 8;
  constexpr std::uint64_t kPerProducer = 12'500;
  constexpr std::size_t kTotal = kProducers * kPerProducer;
  std::string detail;
  bool ok = true;
  for (const ClockMode mode : {ClockMode{SyncMode::synchronized, 0.0}, ClockMode{SyncMode::asynchronous, 32.0}}) {
    const double delay = mode.mode == SyncMode::synchronized ? 0.0 : 0.01;
    Transport t(mode);
    Recorder a, b;
    std::vector<std::size_t> eps;
    for (std::size_t p = 0; p < kProducers; ++p) {
      eps.push_back(t.add_endpoint("p" + std::to_string(p) + "/y"));
      t.subscribe(eps.back(), &a, p, delay);
      t.subscribe(eps.back(), &b, p, delay);
    }
    t.open();
    std::vector<std::thread> threads;
    for (std::size_t p = 0; p < kProducers; ++p) {
      threads.emplace_back([&, p] {
        for (std::uint64_t s = 0; s < kPerProducer; ++s) {
          t.publish(eps[p], Envelope{Payload::Constant(1, static_cast<double>(p)), s, 0.0});
        }
      });
    }
    for (auto& th : threads) th.join();
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(10);
    while ((a.size() < kTotal || b.size() < kTotal) && std::chrono::steady_clock::now() < deadline) {
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    t.shutdown();
    std::size_t violations = 0;
    for (Recorder* r : {&a, &b}) {
      const auto got = r->take();
      std::vector<std::uint64_t> next(kProducers, 0);
      for (const auto& [input, seq] : got) violations += seq != next[input]++;
      for (std::size_t p = 0; p < kProducers; ++p) violations += next[p] != kPerProducer;
      ok = ok && got.size() == kTotal;
    }
    ok = ok && violations == 0;
    detail += fmt("%s%s: 2 x %zu delivered, %zu order/count violations", detail.empty() ? "" : "; ",
                  mode.mode == SyncMode::synchronized ? "sync" : "async", kTotal, violations);
  }
  return {ok, detail};
}

double energy_drift(const PendulumParams<double>& p, double theta0) {
  EngineState s;
  s.q << theta0, 0.0;
  const double e0 = pendulum_energy(s.q, p);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    s = step(s, 0.0, p, 100.0);
    worst = std::max(worst, std::abs(pendulum_energy(s.q, p) - e0) / e0);
  }
  return worst;
}

Outcome integrator() {
  PendulumParams<double> p;
  p.damping = 0.0;
  const double rate = 100.0;
  const double oracle = 2.0 * std::numbers::pi * std::sqrt(p.inertia() / (p.mass * p.gravity * p.length));
  EngineState s;
  s.q << 0.01, 0.0;
  std::vector<double> crossings;
  while (crossings.size() < 11) {
    const EngineState next = step(s, 0.0, p, rate);
    if (s.q(0) > 0.0 && next.q(0) <= 0.0) crossings.push_back(s.sim_time + (s.q(0) / (s.q(0) - next.q(0))) / rate);
    s = next;
  }
  const double period = (crossings.back() - crossings.front()) / 10.0;
  const double period_err = std::abs(period / oracle - 1.0);

  PendulumParams<double> unit = p;
  unit.mass = 1.0;
  unit.length = 1.0;
  const double drift = energy_drift(unit, 0.1);
  const double demo_drift = energy_drift(p, 0.1);
  return {period_err < 1e-3 && drift < 1e-6,
          fmt("period %.6f s vs %.6f s (rel err %.1e, need < 1e-3); energy drift over 1000 steps at 100 Hz "
              "%.1e for a 1 m pendulum (need < 1e-6), %.1e at the 0.1 m demo geometry",
              period, oracle, period_err, drift, demo_drift)};
}

Outcome randomization() {
  const char* edge = "lowpass.outputs.y -> pendulum.actuators.volt";
  EnvOptions opts;
  opts.runtime.log_fires = true;
  Environment env(demo_graph(), demo_engine(), builtin_registry(), opts);
  EpisodeConfig c;
  c.max_steps = 1;
  c.randomizations = {{"pendulum/mass", Distribution::uniform(0.0297, 0.0363)}};
  c.delays = {{edge, 0.035, 0.005}};
  double mlo = 1.0, mhi = 0.0, dlo = 1.0, dhi = 0.0;
  bool applied = true;
  for (std::uint64_t seed = 0; seed < 10'000; ++seed) {
    c.seed = seed;
    env.reset(c);
    const double m = env.sampled_states().at("pendulum/mass");
    const double d = env.sampled_delays().at(edge);
    const auto& engine = dynamic_cast<const PendulumEngine&>(env.runtime().node("pendulum/engine").behavior());
    applied = applied && engine.params().mass == m;
    mlo = std::min(mlo, m);
    mhi = std::max(mhi, m);
    dlo = std::min(dlo, d);
    dhi = std::max(dhi, d);
  }
  const bool mass_ok = mlo >= 0.0297 && mhi <= 0.0363 && (mlo - 0.0297) <= 0.01 * 0.0297 &&
                       (0.0363 - mhi) <= 0.01 * 0.0363 && applied;
  const bool delay_range_ok = dlo >= 0.030 && dhi <= 0.040;

  // Constancy: every engine callback of an episode gates on the drawn delay.
  std::size_t mismatches = 0;
  c.max_steps = 60;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    c.seed = seed;
    run_episode(env, random_policy(seed), c);
    const double tau = env.sampled_delays().at(edge);
    const auto& log = env.runtime().node("pendulum/engine").fire_log();
    const auto oracle = oracle_expected_schedule(ChannelTiming{Rate(30), Rate(15), tau, true}, log.size() - 1);
    for (std::size_t k = 0; k < log.size(); ++k) mismatches += log[k].expected.at(0) != oracle[k];
  }
  return {mass_ok && delay_range_ok && mismatches == 0,
          fmt("mass over 1e4 resets in [%.6f, %.6f] (bounds [0.0297, 0.0363], 1%% slack); delay in [%.5f, %.5f]; "
              "%zu gating mismatches against the drawn delay over 20 episodes",
              mlo, mhi, dlo, dhi, mismatches)};
}

Outcome demo_graph_parity() {
  const GraphSpec g = demo_graph();
  const Registry reg = builtin_registry();
  std::vector<ConcreteGraph> resolved;
  std::string detail;
  bool ok = true;
  for (const char* id : {"ode", "counter"}) {
    resolved.push_back(resolve(g, demo_engine(id), reg));
    const auto diags = validate(resolved.back());
    ok = ok && !has_errors(diags);
    Environment env(g, demo_engine(id));
    EpisodeConfig c;
    c.seed = 1;
    c.max_steps = 200;
    const auto r = run_episode(env, random_policy(1), c);
    const bool ran = r.records.size() == 201 && std::abs(r.sim_seconds - 201.0 / 20.0) < 1e-9;
    ok = ok && ran;
    detail += fmt("%s: %zu diagnostics, %zu steps to t=%.2f s; ", id, diags.size(), r.records.size() - 1, r.sim_seconds);
  }
  auto agnostic = [](const ConcreteGraph& c) {
    std::vector<NodeSpec> nodes;
    std::vector<ConcreteEdge> edges;
    for (const ConcreteNode& n : c.nodes) {
      if (n.origin.empty() || n.origin == kEnvNode) nodes.push_back(n.spec);
    }
    for (const ConcreteEdge& e : c.edges) {
      if (e.agnostic_edge) edges.push_back(e);
    }
    return std::make_pair(nodes, edges);
  };
  const bool same = agnostic(resolved[0]) == agnostic(resolved[1]);
  ok = ok && same;
  detail += same ? "agnostic nodes and edges identical" : "agnostic structure differs";
  return {ok, detail};
}

}  // namespace

int main() {
  criterion(1, "oracle conformance", 10.0, conformance);
  criterion(2, "sync determinism", 120.0, sync_determinism);
  criterion(3, "async degradation", 0.0, async_degradation);
  criterion(4, "delay parallelization", 60.0, delay_speedup);
  criterion(5, "liveness", 60.0, liveness);
  criterion(6, "transport contract", 30.0, transport_stress);
  criterion(7, "integrator sanity", 0.0, integrator);
  criterion(8, "domain randomization", 0.0, randomization);
  criterion(9, "pendulum graph parity", 0.0, demo_graph_parity);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "syncflow/engines.hpp"
#include "syncflow/errors.hpp"
#include "syncflow/oracle.hpp"
#include "syncflow/pendulum.hpp"
#include "syncflow/runtime.hpp"

using namespace syncflow;

namespace {

RuntimeOptions cooperative() {
  RuntimeOptions o;
  o.driver = Driver::cooperative;
  return o;
}

PendulumParams<double> frictionless(double length = 0.1) {
  PendulumParams<double> p;
  p.length = length;
  p.damping = 0.0;
  return p;
}

// Mean period between downward zero crossings, crossings located by linear
// interpolation between samples.
double measured_period(const PendulumParams<double>& p, double theta0, double rate, double periods) {
  EngineState s;
  s.q << theta0, 0.0;
  const double expected = 2.0 * std::numbers::pi * std::sqrt(p.inertia() / (p.mass * p.gravity * p.length));
  const auto n = static_cast<std::uint64_t>(std::ceil((periods + 1.0) * expected * rate));
  std::vector<double> crossings;
  for (std::uint64_t i = 0; i < n; ++i) {
    const EngineState next = step(s, 0.0, p, rate);
    if (s.q(0) > 0.0 && next.q(0) <= 0.0) {
      crossings.push_back(s.sim_time + (s.q(0) / (s.q(0) - next.q(0))) / rate);
    }
    s = next;
  }
  if (crossings.size() < 2) return NAN;
  return (crossings.back() - crossings.front()) / static_cast<double>(crossings.size() - 1);
}

double relative_energy_drift(const PendulumParams<double>& p, double theta0, double rate, int steps) {
  EngineState s;
  s.q << theta0, 0.0;
  const double e0 = pendulum_energy(s.q, p);
  double worst = 0.0;
  for (int i = 0; i < steps; ++i) {
    s = step(s, 0.0, p, rate);
    worst = std::max(worst, std::abs(pendulum_energy(s.q, p) - e0));
  }
  return worst / e0;
}

}  // namespace

TEST(Pendulum, EquilibriaStayPut) {
  const PendulumParams<double> p;
  EngineState down;
  EngineState up;
  up.q << std::numbers::pi, 0.0;
  for (int i = 0; i < 1000; ++i) {
    down = step(down, 0.0, p, 30.0);
    up = step(up, 0.0, p, 30.0);
  }
  EXPECT_EQ(down.q, PendulumState<double>::Zero());
  EXPECT_EQ(up.q(0), std::numbers::pi);
  EXPECT_EQ(up.q(1), 0.0);
  EXPECT_EQ(up.step_index, 1000u);
  EXPECT_DOUBLE_EQ(up.sim_time, 1000.0 / 30.0);
}

TEST(Pendulum, SmallAnglePeriod) {
  const PendulumParams<double> p = frictionless();
  const double oracle = 2.0 * std::numbers::pi * std::sqrt(p.length / p.gravity);
  EXPECT_NEAR(small_angle_period(p), oracle, 1e-12);
  const double measured = measured_period(p, 0.01, 100.0, 10.0);
  EXPECT_NEAR(measured / oracle, 1.0, 1e-3) << measured << " vs " << oracle;
}

TEST(Pendulum, RodInertiaShortensPeriod) {
  PendulumParams<double> p = frictionless();
  p.model = PendulumModel::rod;
  EXPECT_DOUBLE_EQ(p.inertia(), p.mass * p.length * p.length / 3.0);
  const double oracle = 2.0 * std::numbers::pi * std::sqrt(p.length / (3.0 * p.gravity));
  EXPECT_NEAR(measured_period(p, 0.01, 100.0, 10.0) / oracle, 1.0, 1e-3);
}

TEST(Pendulum, EnergyDriftUnitPendulum) {
  PendulumParams<double> p;
  p.mass = 1.0;
  p.length = 1.0;
  p.damping = 0.0;
  EXPECT_LT(relative_energy_drift(p, 1.0, 100.0, 1000), 1e-6);
}

TEST(Pendulum, EnergyDriftScalesWithFourthPowerOfStep) {
  // Demo geometry: omega = sqrt(g / l) ~ 9.9 rad/s, so h omega ~ 0.1 at 100 Hz
  // and the drift is governed by the RK4 global error, O(h^4).
  const PendulumParams<double> p = frictionless();
  const double coarse = relative_energy_drift(p, 1.0, 100.0, 1000);
  const double fine = relative_energy_drift(p, 1.0, 200.0, 2000);
  EXPECT_LT(coarse, 1e-4);
  EXPECT_GT(coarse / fine, 8.0);
  EXPECT_LT(coarse / fine, 32.0);
}

TEST(Pendulum, DampingDissipates) {
  PendulumParams<double> p;
  p.damping = 1e-3;
  EngineState s;
  s.q << 1.0, 0.0;
  double e = pendulum_energy(s.q, p);
  for (int i = 0; i < 300; ++i) {
    s = step(s, 0.0, p, 100.0);
    const double next = pendulum_energy(s.q, p);
    EXPECT_LE(next, e + 1e-12);
    e = next;
  }
}

TEST(Pendulum, StepIsDeterministic) {
  const PendulumParams<double> p;
  EngineState a;
  EngineState b;
  a.q << 0.3, -1.0;
  b.q = a.q;
  for (int i = 0; i < 5000; ++i) {
    const double u = std::sin(0.01 * i);
    a = step(a, u, p, 30.0);
    b = step(b, u, p, 30.0);
  }
  EXPECT_EQ(a.q, b.q);
}

TEST(Pendulum, NonFiniteStateFaults) {
  const PendulumParams<double> p;
  EXPECT_THROW(step(EngineState{}, INFINITY, p, 30.0), EpisodeFault);
  EXPECT_THROW(step(EngineState{}, NAN, p, 30.0), EpisodeFault);
}

TEST(Pendulum, Rk4MatchesExponential) {
  // x' = -x: one RK4 step is the degree-4 Taylor polynomial of exp(-h).
  const double h = 0.1;
  const Eigen::Vector2d x(1.0, 2.0);
  const Eigen::Vector2d y = rk4_step([](const Eigen::Vector2d& v) { return Eigen::Vector2d(-v); }, x, h);
  const double taylor = 1.0 - h + h * h / 2.0 - h * h * h / 6.0 + h * h * h * h / 24.0;
  EXPECT_NEAR(y(0), taylor, 1e-15);
  EXPECT_NEAR(y(1), 2.0 * taylor, 1e-15);
  EXPECT_NEAR(y(0), std::exp(-h), 1e-7);
}

TEST(Pendulum, FloatInstantiation) {
  PendulumParams<float> p;
  p.damping = 0.0f;
  PendulumState<float> q(0.5f, 0.0f);
  for (int i = 0; i < 30; ++i) q = pendulum_step(q, 0.0f, p, 1.0f / 30.0f);
  EXPECT_TRUE(q.allFinite());
  EXPECT_NEAR(pendulum_energy(q, p), pendulum_energy(PendulumState<float>(0.5f, 0.0f), p), 1e-4f);
}

TEST(Pendulum, AngleHelpers) {
  EXPECT_EQ(folded_sin(std::numbers::pi), 0.0);
  EXPECT_EQ(folded_sin(-3.0 * std::numbers::pi), 0.0);
  EXPECT_NEAR(folded_sin(1.0), std::sin(1.0), 1e-15);
  EXPECT_DOUBLE_EQ(wrap_angle(-std::numbers::pi), std::numbers::pi);
  EXPECT_NEAR(wrap_angle(2.0 * std::numbers::pi + 0.25), 0.25, 1e-15);
}

TEST(PendulumParams, FromJson) {
  const auto p = pendulum_params_from_json({{"mass", 0.04}, {"model", "rod"}});
  EXPECT_EQ(p.mass, 0.04);
  EXPECT_EQ(p.model, PendulumModel::rod);
  EXPECT_EQ(p.length, 0.1);
  EXPECT_THROW(pendulum_params_from_json({{"model", "sphere"}}), ConfigError);
  EXPECT_THROW(pendulum_params_from_json({{"mass", -1.0}}), std::invalid_argument);
}

namespace {

struct ActuatorCase {
  double engine_rate;
  double source_rate;
  double delay;
  bool cyclic;
};

// Source node numbering its messages 1, 2, ... feeding a counter engine.
// Returns the action the engine held at each k (0 = default).
std::vector<double> held_actions(const ActuatorCase& c, std::uint64_t steps) {
  GraphRuntime rt(cooperative());
  NodeSpec src;
  src.name = "src";
  src.kind = "source";
  src.rate = c.source_rate;
  src.outputs = {OutputSpec{"y", 1}};
  rt.add_node(src, std::make_unique<FunctionBehavior>([](const CallbackContext& ctx) {
    return std::vector<Payload>{Payload::Constant(1, static_cast<double>(ctx.k + 1))};
  }));
  NodeSpec eng;
  eng.name = "engine";
  eng.kind = "counter_engine";
  eng.rate = c.engine_rate;
  eng.inputs = {ChannelSpec{"u", "src/y", c.source_rate, c.delay, 1, c.cyclic, 1}};
  eng.outputs = {OutputSpec{"theta", 1}, OutputSpec{"thetadot", 1}};
  rt.add_node(eng, std::make_unique<CounterEngine>(eng));
  rt.wire();
  rt.reset();
  rt.start(Horizon{steps, c.engine_rate});
  EXPECT_EQ(rt.wait(std::chrono::seconds(10)), RunStatus::finished) << rt.fault_message();
  rt.stop();
  std::vector<double> out;
  for (std::uint64_t k = 0; k <= steps; ++k) {
    const auto s = rt.telemetry().state("engine", k);
    EXPECT_TRUE(s.has_value()) << k;
    if (!s) break;
    EXPECT_EQ(s->q(0), static_cast<double>(k));
    out.push_back(s->q(1));
  }
  return out;
}

class EngineActuator : public ::testing::TestWithParam<ActuatorCase> {};

}  // namespace

TEST_P(EngineActuator, HoldsNewestConsumedAction) {
  const ActuatorCase c = GetParam();
  const std::uint64_t steps = 90;
  const auto held = held_actions(c, steps);
  const auto schedule = oracle_expected_schedule(
      ChannelTiming{Rate(c.engine_rate), Rate(c.source_rate), c.delay, c.cyclic}, steps);
  ASSERT_EQ(held.size(), schedule.size());
  std::uint64_t consumed = 0;
  for (std::size_t k = 0; k < held.size(); ++k) {
    consumed += schedule[k];
    EXPECT_EQ(held[k], static_cast<double>(consumed)) << "k=" << k;
  }
}

INSTANTIATE_TEST_SUITE_P(Rates, EngineActuator,
                         ::testing::Values(ActuatorCase{30, 20, 0.0, true}, ActuatorCase{30, 20, 0.0, false},
                                           ActuatorCase{30, 15, 0.1, true}, ActuatorCase{30, 10, 0.0, false},
                                           ActuatorCase{30, 60, 0.05, false}, ActuatorCase{30, 7, 0.3, true}));

TEST(EngineNode, DelayedActuatorStartsFromDefault) {
  // 0.1 s of delay at 30 Hz: message 0 reaches the engine at t = 0.1 (k = 3).
  // The cycle-breaking count shifts the window by one callback, so it is
  // consumed at k = 4 and callbacks 0..3 run on the default (zero) action.
  const auto held = held_actions(ActuatorCase{30, 15, 0.1, true}, 10);
  for (int k = 0; k < 4; ++k) EXPECT_EQ(held[k], 0.0) << k;
  EXPECT_EQ(held[4], 1.0);
}

TEST(EngineNode, PublishesStateBeforeIntegrating) {
  NodeSpec spec;
  spec.name = "p";
  spec.kind = "ode_pendulum";
  spec.rate = 30;
  spec.outputs = {OutputSpec{"theta", 1}, OutputSpec{"thetadot", 1}};
  spec.params = {{"theta0", 0.4}, {"thetadot0", -0.2}};
  PendulumEngine engine(spec);
  CallbackContext ctx;
  ctx.spec = &spec;
  const auto out = engine.callback(ctx);
  EXPECT_EQ(out[0](0), 0.4);
  EXPECT_EQ(out[1](0), -0.2);
  EXPECT_EQ(engine.state().step_index, 1u);
  EXPECT_EQ(engine.action(), 0.0);
}

TEST(EngineNode, NonFiniteActionFaultsTheRun) {
  GraphRuntime rt(cooperative());
  NodeSpec src;
  src.name = "src";
  src.kind = "source";
  src.rate = 30;
  src.outputs = {OutputSpec{"y", 1}};
  rt.add_node(src, std::make_unique<FunctionBehavior>([](const CallbackContext& ctx) {
    return std::vector<Payload>{Payload::Constant(1, ctx.k == 5 ? NAN : 0.0)};
  }));
  NodeSpec eng;
  eng.name = "engine";
  eng.kind = "ode_pendulum";
  eng.rate = 30;
  eng.inputs = {ChannelSpec{"u", "src/y", 30, 0.0, 1, false, 1}};
  eng.outputs = {OutputSpec{"theta", 1}, OutputSpec{"thetadot", 1}};
  rt.add_node(eng, std::make_unique<PendulumEngine>(eng));
  rt.wire();
  rt.reset();
  rt.start(Horizon{30, 30});
  EXPECT_EQ(rt.wait(std::chrono::seconds(10)), RunStatus::faulted);
  EXPECT_THROW(rt.rethrow_if_faulted(), EpisodeFault);
  EXPECT_NE(rt.fault_message().find("non-finite"), std::string::npos) << rt.fault_message();
  rt.stop();
}

TEST(EngineNode, RejectsUnknownPortsAndStates) {
  NodeSpec spec;
  spec.name = "p";
  spec.rate = 30;
  spec.outputs = {OutputSpec{"theta", 1}, OutputSpec{"omega", 1}};
  EXPECT_THROW(PendulumEngine{spec}, ConfigError);
  spec.outputs = {OutputSpec{"theta", 1}, OutputSpec{"thetadot", 1}};
  spec.states = {"colour"};
  EXPECT_THROW(PendulumEngine{spec}, ConfigError);
}

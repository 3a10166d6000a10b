#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "syncflow/graph.hpp"

namespace syncflow {

/// The pendulum swing-up graph: a low-pass filter between the agent's action
/// and a delayed actuator, a skip edge feeding the filter output back as an
/// observation, and two windowed sensor observations.
struct DemoGraphOptions {
  double env_rate = 20.0;
  double lowpass_rate = 15.0;
  double cutoff = 7.0;
  double sensor_rate = 60.0;
  double actuator_delay = 0.1;
  std::size_t sensor_window = 2;
  std::vector<std::string> states = {"mass", "length", "damping", "torque_gain", "theta0", "thetadot0"};
  nlohmann::json pendulum_params = nlohmann::json::object();
};

GraphSpec demo_graph(const DemoGraphOptions& options = {});
EngineSpec demo_engine(std::string id = "ode", double real_time_factor = 0.0, bool sync = true);

/// Engine and controller, each with an injected compute cost, closing a loop
/// through the pendulum sensor. With `delay` the controller->actuator edge
/// carries one engine period of delay and the two callbacks can overlap.
struct SpeedupOptions {
  bool delay = false;
  double rate = 30.0;
  double cost = 0.005;
  std::string cost_mode = "sleep";
};

GraphSpec speedup_graph(const SpeedupOptions& options);
EngineSpec speedup_engine(double rate = 30.0);

}  // namespace syncflow

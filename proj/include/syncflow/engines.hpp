#pragma once

#include <optional>
#include <string>

#include "syncflow/node.hpp"
#include "syncflow/pendulum.hpp"

namespace syncflow {

/// Engine node hosting the pendulum ODE.
///
/// Each callback: take the newest actuator message if any arrived (zero-order
/// hold otherwise), pace against the wall clock, publish the state at t_k,
/// then integrate to t_{k+1}. Reads params mass, length, damping,
/// torque_gain, gravity, model ("disk" | "rod"), theta0, thetadot0; the
/// numeric ones may also be registered as states.
class PendulumEngine : public NodeBehavior {
 public:
  explicit PendulumEngine(const NodeSpec& spec);

  std::vector<Payload> callback(const CallbackContext& ctx) override;
  void reset(const StateValues& values) override;

  const EngineState& state() const noexcept { return state_; }
  const PendulumParams<double>& params() const noexcept { return params_; }
  double action() const noexcept { return u_; }

 private:
  std::string name_;
  double rate_;
  nlohmann::json defaults_;
  PendulumParams<double> params_;
  EngineState state_;
  double u_ = 0.0;
  std::optional<std::size_t> u_input_;
  std::size_t theta_out_ = 0;
  std::size_t thetadot_out_ = 1;
};

/// Toy engine for protocol tests: theta counts callbacks, thetadot echoes
/// the held action.
class CounterEngine : public NodeBehavior {
 public:
  explicit CounterEngine(const NodeSpec& spec);

  std::vector<Payload> callback(const CallbackContext& ctx) override;
  void reset(const StateValues& values) override;

 private:
  std::string name_;
  double count_ = 0.0;
  double u_ = 0.0;
  std::optional<std::size_t> u_input_;
  std::size_t theta_out_ = 0;
  std::size_t thetadot_out_ = 1;
};

PendulumParams<double> pendulum_params_from_json(const nlohmann::json& j);

}  // namespace syncflow

#include "syncflow/engines.hpp"

#include <cmath>

#include "syncflow/errors.hpp"
#include "syncflow/runtime.hpp"
#include "syncflow/transport.hpp"

namespace syncflow {

namespace {

const char* const kPendulumStates[] = {"mass",        "length",  "damping",  "torque_gain",
                                       "gravity",     "theta0",  "thetadot0"};

std::size_t require_output(const NodeSpec& spec, const char* name) {
  auto idx = spec.output_index(name);
  if (!idx) throw ConfigError("engine '" + spec.name + "' needs an output named '" + name + "'");
  return *idx;
}

void check_outputs(const NodeSpec& spec) {
  for (const OutputSpec& o : spec.outputs) {
    if (o.name != "theta" && o.name != "thetadot") {
      throw ConfigError("engine '" + spec.name + "' has unknown output '" + o.name + "'");
    }
    if (o.size != 1) throw ConfigError("engine '" + spec.name + "' output '" + o.name + "' must have size 1");
  }
}

double held_action(const CallbackContext& ctx, std::optional<std::size_t> input, double current) {
  if (!input) return current;
  const InputMessages& in = ctx.inputs[*input];
  if (in.consumed.empty()) return current;
  const double u = in.consumed.back().payload(0);
  if (!std::isfinite(u)) throw EpisodeFault("non-finite action on '" + ctx.spec->name + "'");
  return u;
}

}  // namespace

PendulumParams<double> pendulum_params_from_json(const nlohmann::json& j) {
  PendulumParams<double> p;
  p.mass = j.value("mass", p.mass);
  p.length = j.value("length", p.length);
  p.damping = j.value("damping", p.damping);
  p.torque_gain = j.value("torque_gain", p.torque_gain);
  p.gravity = j.value("gravity", p.gravity);
  const std::string model = j.value("model", std::string("disk"));
  if (model == "disk") {
    p.model = PendulumModel::disk;
  } else if (model == "rod") {
    p.model = PendulumModel::rod;
  } else {
    throw ConfigError("unknown pendulum model '" + model + "'");
  }
  p.check();
  return p;
}

EngineState step(const EngineState& state, double u, const PendulumParams<double>& params, double rate) {
  EngineState next;
  next.q = pendulum_step(state.q, u, params, 1.0 / rate);
  if (!next.q.allFinite()) throw EpisodeFault("pendulum state became non-finite");
  next.step_index = state.step_index + 1;
  next.sim_time = static_cast<double>(next.step_index) / rate;
  return next;
}

PendulumEngine::PendulumEngine(const NodeSpec& spec)
    : name_(spec.name), rate_(Rate(spec.rate).hz()), defaults_(spec.params) {
  check_outputs(spec);
  theta_out_ = require_output(spec, "theta");
  thetadot_out_ = require_output(spec, "thetadot");
  u_input_ = spec.input_index("u");
  for (const std::string& s : spec.states) {
    bool known = false;
    for (const char* k : kPendulumStates) known |= (s == k);
    if (!known) throw ConfigError("engine '" + spec.name + "' cannot register state '" + s + "'");
  }
  reset({});
}

void PendulumEngine::reset(const StateValues& values) {
  nlohmann::json j = defaults_;
  for (const auto& [k, v] : values) j[k] = v;
  params_ = pendulum_params_from_json(j);
  state_ = EngineState{};
  state_.q << j.value("theta0", 0.0), j.value("thetadot0", 0.0);
  u_ = 0.0;
}

std::vector<Payload> PendulumEngine::callback(const CallbackContext& ctx) {
  u_ = held_action(ctx, u_input_, u_);
  if (ctx.throttle) ctx.throttle->wait(ctx.sim_time);
  if (ctx.telemetry) ctx.telemetry->record_state(name_, ctx.k, ctx.sim_time, state_.q);

  std::vector<Payload> out(2);
  out[theta_out_] = Payload::Constant(1, wrap_angle(state_.q(0)));
  out[thetadot_out_] = Payload::Constant(1, state_.q(1));
  state_ = step(state_, u_, params_, rate_);
  return out;
}

CounterEngine::CounterEngine(const NodeSpec& spec) : name_(spec.name) {
  check_outputs(spec);
  theta_out_ = require_output(spec, "theta");
  thetadot_out_ = require_output(spec, "thetadot");
  u_input_ = spec.input_index("u");
}

void CounterEngine::reset(const StateValues&) {
  count_ = 0.0;
  u_ = 0.0;
}

std::vector<Payload> CounterEngine::callback(const CallbackContext& ctx) {
  u_ = held_action(ctx, u_input_, u_);
  if (ctx.throttle) ctx.throttle->wait(ctx.sim_time);
  if (ctx.telemetry) {
    ctx.telemetry->record_state(name_, ctx.k, ctx.sim_time, Eigen::Vector2d(count_, u_));
  }
  std::vector<Payload> out(2);
  out[theta_out_] = Payload::Constant(1, count_);
  out[thetadot_out_] = Payload::Constant(1, u_);
  count_ += 1.0;
  return out;
}

}  // namespace syncflow

#include "syncflow/demo.hpp"

#include "syncflow/registry.hpp"

namespace syncflow {

GraphSpec demo_graph(const DemoGraphOptions& options) {
  GraphSpec g;
  g.env_rate = options.env_rate;
  g.add(make_pendulum("pendulum", {options.sensor_rate, options.states, options.pendulum_params, true}));
  g.add(make_lowpass("lowpass", options.lowpass_rate, options.cutoff));
  g = connect(std::move(g), {"actions.volt", "lowpass.inputs.u"});
  g = connect(std::move(g), {"lowpass.outputs.y", "pendulum.actuators.volt", options.actuator_delay});
  g = connect(std::move(g), {"lowpass.outputs.y", "observations.y", 0.0, 1, true});
  g = connect(std::move(g), {"pendulum.sensors.th", "observations.th", 0.0, options.sensor_window});
  g = connect(std::move(g), {"pendulum.sensors.thdot", "observations.thdot", 0.0, options.sensor_window});
  return g;
}

EngineSpec demo_engine(std::string id, double real_time_factor, bool sync) {
  return EngineSpec{std::move(id), 30.0, real_time_factor, sync};
}

GraphSpec speedup_graph(const SpeedupOptions& options) {
  const nlohmann::json cost = {{"compute_cost", options.cost}, {"cost_mode", options.cost_mode}};

  // The actuator input does not break the loop here; the controller's sensor
  // edge does. Engine step k then needs the controller's output from step k
  // (no delay) or k - 1 (one period of delay).
  ObjectSpec pendulum = make_pendulum("pendulum", {options.rate, {}, cost, false});
  pendulum.sensors.resize(1);  // th only

  NodeDecl ctrl = make_controller("controller", options.rate, 1, 1.0, 0.0);
  ctrl.inputs.push_back(PortSpec{"ref", 1});
  ctrl.params.update(cost);

  GraphSpec g;
  g.env_rate = options.rate;
  g.add(std::move(pendulum));
  g.add(std::move(ctrl));
  g = connect(std::move(g), {"actions.ref", "controller.inputs.ref"});
  g = connect(std::move(g), {"pendulum.sensors.th", "controller.inputs.x", 0.0, 1, true});
  g = connect(std::move(g), {"controller.outputs.u", "pendulum.actuators.volt",
                             options.delay ? 1.0 / options.rate : 0.0});
  g = connect(std::move(g), {"pendulum.sensors.th", "observations.th", 0.0, 1, true});
  return g;
}

EngineSpec speedup_engine(double rate) { return EngineSpec{"ode", rate, 0.0, true}; }

}  // namespace syncflow

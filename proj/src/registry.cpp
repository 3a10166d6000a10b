#include "syncflow/registry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "syncflow/engines.hpp"
#include "syncflow/errors.hpp"

namespace syncflow {

void Registry::add_node_kind(std::string kind, BehaviorFactory factory) {
  kinds_[std::move(kind)] = std::move(factory);
}

void Registry::add_object_engine(std::string object_kind, std::string engine_id,
                                 SubgraphFactory factory) {
  objects_[std::move(object_kind)][std::move(engine_id)] = std::move(factory);
}

bool Registry::has_node_kind(std::string_view kind) const { return kinds_.find(kind) != kinds_.end(); }

const SubgraphFactory* Registry::subgraph(std::string_view object_kind, std::string_view engine_id) const {
  auto o = objects_.find(object_kind);
  if (o == objects_.end()) return nullptr;
  auto e = o->second.find(engine_id);
  return e == o->second.end() ? nullptr : &e->second;
}

std::vector<std::string> Registry::engines_for(std::string_view object_kind) const {
  std::vector<std::string> out;
  auto o = objects_.find(object_kind);
  if (o == objects_.end()) return out;
  for (const auto& [id, f] : o->second) out.push_back(id);
  return out;
}

std::vector<std::string> Registry::engines() const {
  std::vector<std::string> out;
  for (const auto& [kind, engines] : objects_) {
    for (const auto& [id, f] : engines) out.push_back(id);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::unique_ptr<NodeBehavior> Registry::make_behavior(const NodeSpec& spec) const {
  auto it = kinds_.find(spec.kind);
  if (it == kinds_.end()) {
    throw ConfigError("node '" + spec.name + "' has unknown kind '" + spec.kind + "'");
  }
  return it->second(spec);
}

LowPass::LowPass(const NodeSpec& spec) {
  const double cutoff = spec.params.value("cutoff", 0.0);
  if (!(cutoff > 0.0) || !std::isfinite(cutoff)) {
    throw ConfigError("lowpass '" + spec.name + "' needs cutoff > 0");
  }
  if (!spec.input_index("u") || !spec.output_index("y")) {
    throw ConfigError("lowpass '" + spec.name + "' needs input u and output y");
  }
  alpha_ = 1.0 - std::exp(-2.0 * std::numbers::pi * cutoff / Rate(spec.rate).hz());
  y_ = Payload::Zero(spec.outputs.at(*spec.output_index("y")).size);
}

std::vector<Payload> LowPass::callback(const CallbackContext& ctx) {
  const Payload& u = ctx.latest("u");
  y_ += alpha_ * (u - y_);
  return {y_};
}

std::vector<Payload> Relay::callback(const CallbackContext& ctx) { return {ctx.latest("x")}; }

std::vector<Payload> NullNode::callback(const CallbackContext& ctx) {
  std::vector<Payload> out;
  for (const OutputSpec& o : ctx.spec->outputs) out.push_back(Payload::Zero(o.size));
  return out;
}

Controller::Controller(const NodeSpec& spec)
    : kp_(spec.params.value("kp", 1.0)),
      kd_(spec.params.value("kd", 0.0)),
      target_(spec.params.value("target", 0.0)),
      limit_(spec.params.value("limit", 2.0)) {
  if (!spec.input_index("x") || !spec.output_index("u")) {
    throw ConfigError("controller '" + spec.name + "' needs input x and output u");
  }
}

std::vector<Payload> Controller::callback(const CallbackContext& ctx) {
  const Payload& x = ctx.latest("x");
  const double target = ctx.spec->input_index("ref") ? ctx.latest("ref")(0) : target_;
  double u = -kp_ * (x(0) - target);
  if (x.size() > 1) u -= kd_ * x(1);
  return {Payload::Constant(1, std::clamp(u, -limit_, limit_))};
}

NodeDecl make_lowpass(std::string name, double rate, double cutoff) {
  NodeDecl d;
  d.name = std::move(name);
  d.kind = "lowpass";
  d.rate = rate;
  d.inputs = {PortSpec{"u", 1}};
  d.outputs = {PortSpec{"y", 1}};
  d.params = {{"cutoff", cutoff}};
  return d;
}

NodeDecl make_controller(std::string name, double rate, int input_size, double kp, double kd) {
  NodeDecl d;
  d.name = std::move(name);
  d.kind = "controller";
  d.rate = rate;
  d.inputs = {PortSpec{"x", input_size}};
  d.outputs = {PortSpec{"u", 1}};
  d.params = {{"kp", kp}, {"kd", kd}};
  return d;
}

ObjectSpec make_pendulum(std::string name, PendulumOptions options) {
  ObjectSpec o;
  o.name = std::move(name);
  o.kind = "pendulum";
  o.sensors = {ObjectChannel{"th", options.sensor_rate, 1, {}},
               ObjectChannel{"thdot", options.sensor_rate, 1, {}}};
  o.actuators = {ObjectChannel{"volt", 0.0, 1, {}}};
  o.states = std::move(options.states);
  o.params = std::move(options.params);
  o.actuators_cyclic = options.actuators_cyclic;
  return o;
}

namespace {

Subgraph pendulum_subgraph(const ObjectSpec& o, const EngineSpec& e, const char* engine_kind) {
  Subgraph sub;
  NodeSpec eng;
  eng.name = o.name + "/engine";
  eng.kind = engine_kind;
  eng.rate = e.rate;
  eng.outputs = {OutputSpec{"theta", 1}, OutputSpec{"thetadot", 1}};
  eng.states = o.states;
  eng.params = o.params;

  for (const ObjectChannel& a : o.actuators) {
    if (!a.enabled_for(e.id)) continue;
    if (a.name != "volt") throw ConfigError("pendulum '" + o.name + "' has unknown actuator '" + a.name + "'");
    ChannelSpec u;
    u.name = "u";
    u.size = a.size;
    u.cyclic = o.actuators_cyclic;
    eng.inputs.push_back(u);
    sub.actuators[a.name] = {eng.name, "u"};
  }
  for (const ObjectChannel& s : o.sensors) {
    if (!s.enabled_for(e.id)) continue;
    std::string port;
    if (s.name == "th") {
      port = "theta";
    } else if (s.name == "thdot") {
      port = "thetadot";
    } else {
      throw ConfigError("pendulum '" + o.name + "' has unknown sensor '" + s.name + "'");
    }
    NodeSpec relay;
    relay.name = o.name + "/" + s.name;
    relay.kind = "relay";
    relay.rate = s.rate > 0.0 ? s.rate : e.rate;
    ChannelSpec x;
    x.name = "x";
    x.size = s.size;
    relay.inputs = {x};
    relay.outputs = {OutputSpec{"y", s.size}};
    sub.edges.push_back(ConcreteEdge{eng.name, port, relay.name, "x", 0.0, 1, false, std::nullopt});
    sub.sensors[s.name] = {relay.name, "y"};
    sub.nodes.push_back(std::move(relay));
  }
  sub.state_node = eng.name;
  sub.nodes.insert(sub.nodes.begin(), std::move(eng));
  return sub;
}

}  // namespace

Registry builtin_registry() {
  Registry r;
  r.add_node_kind("lowpass", [](const NodeSpec& s) { return std::make_unique<LowPass>(s); });
  r.add_node_kind("relay", [](const NodeSpec&) { return std::make_unique<Relay>(); });
  r.add_node_kind("null", [](const NodeSpec&) { return std::make_unique<NullNode>(); });
  r.add_node_kind("environment", [](const NodeSpec&) { return std::make_unique<NullNode>(); });
  r.add_node_kind("controller", [](const NodeSpec& s) { return std::make_unique<Controller>(s); });
  r.add_node_kind("ode_pendulum", [](const NodeSpec& s) { return std::make_unique<PendulumEngine>(s); });
  r.add_node_kind("counter_engine", [](const NodeSpec& s) { return std::make_unique<CounterEngine>(s); });
  r.add_object_engine("pendulum", "ode", [](const ObjectSpec& o, const EngineSpec& e) {
    return pendulum_subgraph(o, e, "ode_pendulum");
  });
  r.add_object_engine("pendulum", "counter", [](const ObjectSpec& o, const EngineSpec& e) {
    return pendulum_subgraph(o, e, "counter_engine");
  });
  return r;
}

std::unique_ptr<GraphRuntime> build_runtime(const ConcreteGraph& graph, const Registry& registry,
                                            RuntimeOptions options,
                                            std::shared_ptr<ParameterStore> params,
                                            const BehaviorOverride& override) {
  const auto diags = validate(graph);
  if (has_errors(diags)) {
    std::string msg = "graph is invalid:";
    for (const Diagnostic& d : diags) {
      if (d.severity == Severity::error) msg += "\n  " + d.code + ": " + d.message;
    }
    throw ConfigError(msg);
  }
  options.clock.mode = graph.engine.sync ? SyncMode::synchronized : SyncMode::asynchronous;
  options.clock.target_rtf = graph.engine.real_time_factor;
  auto rt = std::make_unique<GraphRuntime>(options, std::move(params));
  for (const ConcreteNode& n : graph.nodes) {
    std::unique_ptr<NodeBehavior> b = override ? override(n.spec) : nullptr;
    if (!b) b = registry.make_behavior(n.spec);
    rt->add_node(n.spec, std::move(b));
  }
  rt->wire();
  return rt;
}

}  // namespace syncflow

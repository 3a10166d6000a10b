#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "syncflow/graph.hpp"
#include "syncflow/runtime.hpp"

namespace syncflow {

/// An object's engine-specific replacement.
struct Subgraph {
  std::vector<NodeSpec> nodes;  // names prefixed "<object>/"
  std::vector<ConcreteEdge> edges;
  std::map<std::string, std::pair<std::string, std::string>> sensors;    // -> (node, output)
  std::map<std::string, std::pair<std::string, std::string>> actuators;  // -> (node, input)
  std::string state_node;  // receives the object's registered states
};

using SubgraphFactory = std::function<Subgraph(const ObjectSpec&, const EngineSpec&)>;
using BehaviorFactory = std::function<std::unique_ptr<NodeBehavior>(const NodeSpec&)>;

class Registry {
 public:
  void add_node_kind(std::string kind, BehaviorFactory factory);
  void add_object_engine(std::string object_kind, std::string engine_id, SubgraphFactory factory);

  bool has_node_kind(std::string_view kind) const;
  const SubgraphFactory* subgraph(std::string_view object_kind, std::string_view engine_id) const;
  std::vector<std::string> engines_for(std::string_view object_kind) const;
  std::vector<std::string> engines() const;

  /// Throws ConfigError for an unknown kind.
  std::unique_ptr<NodeBehavior> make_behavior(const NodeSpec& spec) const;

 private:
  std::map<std::string, BehaviorFactory, std::less<>> kinds_;
  std::map<std::string, std::map<std::string, SubgraphFactory, std::less<>>, std::less<>> objects_;
};

/// Node kinds: lowpass, relay, null, controller, environment (zero actions),
/// ode_pendulum, counter_engine. Object kinds: pendulum (engines ode, counter).
Registry builtin_registry();

/// First-order low-pass: y += alpha (u - y), alpha = 1 - exp(-2 pi cutoff / rate).
class LowPass : public NodeBehavior {
 public:
  explicit LowPass(const NodeSpec& spec);
  std::vector<Payload> callback(const CallbackContext& ctx) override;
  void reset(const StateValues&) override { y_.setZero(); }
  double alpha() const noexcept { return alpha_; }

 private:
  double alpha_;
  Payload y_;
};

/// Forwards the newest message on "x" to "y".
class Relay : public NodeBehavior {
 public:
  std::vector<Payload> callback(const CallbackContext& ctx) override;
};

/// Emits zeros on every output.
class NullNode : public NodeBehavior {
 public:
  std::vector<Payload> callback(const CallbackContext& ctx) override;
};

/// u = clamp(-kp (x[0] - target) - kd x[1], +-limit) from the newest "x".
/// An optional "ref" input overrides the target.
class Controller : public NodeBehavior {
 public:
  explicit Controller(const NodeSpec& spec);
  std::vector<Payload> callback(const CallbackContext& ctx) override;

 private:
  double kp_, kd_, target_, limit_;
};

NodeDecl make_lowpass(std::string name, double rate, double cutoff);
NodeDecl make_controller(std::string name, double rate, int input_size, double kp, double kd = 0.0);

struct PendulumOptions {
  double sensor_rate = 60.0;
  std::vector<std::string> states;  // e.g. {"mass", "theta0"}
  nlohmann::json params = nlohmann::json::object();
  bool actuators_cyclic = true;
};

/// Sensors th, thdot; actuator volt.
ObjectSpec make_pendulum(std::string name, PendulumOptions options = {});

using BehaviorOverride = std::function<std::unique_ptr<NodeBehavior>(const NodeSpec&)>;

/// Validates, then instantiates every node. The clock comes from the
/// graph's engine spec. `override` may supply behaviors (nullptr = default).
std::unique_ptr<GraphRuntime> build_runtime(const ConcreteGraph& graph, const Registry& registry,
                                            RuntimeOptions options = {},
                                            std::shared_ptr<ParameterStore> params = nullptr,
                                            const BehaviorOverride& override = {});

}  // namespace syncflow

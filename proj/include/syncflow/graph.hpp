#pragma once

// Engine-agnostic graphs and their resolution into runnable node sets.
//
// Endpoint references are dotted strings:
//   <node>.outputs.<port>    <node>.inputs.<port>
//   <object>.sensors.<name>  <object>.actuators.<name>
//   actions.<name>           observations.<name>

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "syncflow/node.hpp"

namespace syncflow {

class Registry;

inline constexpr const char* kEnvNode = "env";

struct PortSpec {
  std::string name;
  int size = 1;
  friend bool operator==(const PortSpec&, const PortSpec&) = default;
};

struct NodeDecl {
  std::string name;
  std::string kind;
  double rate = 0.0;
  std::vector<PortSpec> inputs;
  std::vector<PortSpec> outputs;
  std::vector<std::string> states;
  nlohmann::json params = nlohmann::json::object();
  friend bool operator==(const NodeDecl&, const NodeDecl&) = default;
};

struct ObjectChannel {
  std::string name;
  double rate = 0.0;  // sensors only; actuators run at the engine rate
  int size = 1;
  std::vector<std::string> engines;  // empty: available under every engine
  friend bool operator==(const ObjectChannel&, const ObjectChannel&) = default;

  bool enabled_for(std::string_view engine) const;
};

struct ObjectSpec {
  std::string name;
  std::string kind;
  std::vector<ObjectChannel> sensors;
  std::vector<ObjectChannel> actuators;
  std::vector<std::string> states;
  nlohmann::json params = nlohmann::json::object();
  // Whether the engine's actuator inputs break the actuator->sensor cycle.
  bool actuators_cyclic = true;
  friend bool operator==(const ObjectSpec&, const ObjectSpec&) = default;
};

struct EdgeSpec {
  std::string source;
  std::string target;
  double delay = 0.0;
  std::size_t window = 1;
  bool skip = false;
  friend bool operator==(const EdgeSpec&, const EdgeSpec&) = default;
};

struct GraphSpec {
  double env_rate = 0.0;
  std::vector<NodeDecl> nodes;
  std::vector<ObjectSpec> objects;
  std::vector<EdgeSpec> edges;
  std::vector<PortSpec> actions;
  std::vector<PortSpec> observations;
  friend bool operator==(const GraphSpec&, const GraphSpec&) = default;

  const NodeDecl* find_node(std::string_view name) const;
  const ObjectSpec* find_object(std::string_view name) const;

  GraphSpec& add(NodeDecl node);
  GraphSpec& add(ObjectSpec object);
};

struct EngineSpec {
  std::string id = "ode";
  double rate = 30.0;
  double real_time_factor = 0.0;
  bool sync = true;
  friend bool operator==(const EngineSpec&, const EngineSpec&) = default;
};

enum class EndpointKind { node_output, node_input, sensor, actuator, action, observation };

struct EndpointRef {
  EndpointKind kind;
  std::string owner;  // node or object name; empty for actions/observations
  std::string port;

  static EndpointRef parse(std::string_view text);
  std::string str() const;
  bool is_source() const;
};

enum class GraphErrorCode {
  unknown_endpoint,
  type_mismatch,
  duplicate_edge,
  cycle_without_skip,
  invalid_attribute,
  duplicate_name,
  unsupported_engine,
};

const char* to_string(GraphErrorCode code);

class GraphError : public std::runtime_error {
 public:
  GraphError(GraphErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  GraphErrorCode code() const noexcept { return code_; }

 private:
  GraphErrorCode code_;
};

/// Records one edge. Actions and observations are declared on first use,
/// sized from the other endpoint.
GraphSpec connect(GraphSpec graph, const EdgeSpec& edge);

struct ConcreteEdge {
  std::string source_node;
  std::string source_port;
  std::string target_node;
  std::string target_port;
  double delay = 0.0;
  std::size_t window = 1;
  bool skip = false;
  std::optional<std::size_t> agnostic_edge;  // index into GraphSpec::edges
  friend bool operator==(const ConcreteEdge&, const ConcreteEdge&) = default;
};

struct ConcreteNode {
  NodeSpec spec;    // inputs carry source/rate/delay/window once resolved
  std::string origin;  // "" for agnostic nodes, kEnvNode, or the owning object
  friend bool operator==(const ConcreteNode&, const ConcreteNode&) = default;
};

struct ConcreteGraph {
  EngineSpec engine;
  std::vector<ConcreteNode> nodes;
  std::vector<ConcreteEdge> edges;
  std::vector<PortSpec> actions;
  std::vector<PortSpec> observations;
  // Randomizable state path ("<owner>/<state>") -> (node, state name).
  std::vector<std::pair<std::string, std::pair<std::string, std::string>>> state_paths;

  const ConcreteNode* find(std::string_view name) const;
  ConcreteNode* find(std::string_view name);
};

/// Replaces each object by its engine subgraph and adds the environment node.
/// Throws GraphError(unsupported_engine) listing the engines available.
ConcreteGraph resolve(const GraphSpec& graph, const EngineSpec& engine, const Registry& registry);

/// Copies edge attributes into the consuming nodes' ChannelSpecs.
void bind_channels(ConcreteGraph& graph);

enum class Severity { error, warning };

struct Diagnostic {
  std::string code;
  Severity severity = Severity::error;
  std::string message;
  std::vector<std::string> subjects;
};

std::vector<Diagnostic> validate(const ConcreteGraph& graph);
bool has_errors(const std::vector<Diagnostic>& diags);

/// Node/edge listing with stable ordering.
std::string snapshot(const ConcreteGraph& graph);

}  // namespace syncflow

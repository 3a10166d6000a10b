#include "syncflow/graph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "syncflow/errors.hpp"
#include "syncflow/registry.hpp"

namespace syncflow {

namespace {

constexpr double kRateRatioWarning = 100.0;

bool valid_name(std::string_view name) {
  if (name.empty()) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

std::optional<int> port_size(const std::vector<PortSpec>& ports, std::string_view name) {
  for (const auto& p : ports) {
    if (p.name == name) return p.size;
  }
  return std::nullopt;
}

const ObjectChannel* find_channel(const std::vector<ObjectChannel>& chans, std::string_view name) {
  for (const auto& c : chans) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

// Vertex in the agnostic dependency graph. Objects split into an actuator
// side and a sensor side; the engine links them unless its actuator inputs
// are cycle-breaking.
std::string source_vertex(const EndpointRef& r) {
  switch (r.kind) {
    case EndpointKind::node_output: return "n:" + r.owner;
    case EndpointKind::sensor: return "o:" + r.owner + ":out";
    default: return kEnvNode;
  }
}

std::string target_vertex(const EndpointRef& r) {
  switch (r.kind) {
    case EndpointKind::node_input: return "n:" + r.owner;
    case EndpointKind::actuator: return "o:" + r.owner + ":in";
    default: return kEnvNode;
  }
}

std::string edge_label(const ConcreteEdge& e) {
  return e.source_node + "." + e.source_port + " -> " + e.target_node + "." + e.target_port;
}

}  // namespace

bool ObjectChannel::enabled_for(std::string_view engine) const {
  return engines.empty() || std::find(engines.begin(), engines.end(), engine) != engines.end();
}

const NodeDecl* GraphSpec::find_node(std::string_view name) const {
  for (const auto& n : nodes) {
    if (n.name == name) return &n;
  }
  return nullptr;
}

const ObjectSpec* GraphSpec::find_object(std::string_view name) const {
  for (const auto& o : objects) {
    if (o.name == name) return &o;
  }
  return nullptr;
}

GraphSpec& GraphSpec::add(NodeDecl node) {
  if (!valid_name(node.name) || node.name == kEnvNode) {
    throw GraphError(GraphErrorCode::invalid_attribute, "invalid node name '" + node.name + "'");
  }
  if (find_node(node.name) || find_object(node.name)) {
    throw GraphError(GraphErrorCode::duplicate_name, "name '" + node.name + "' already used");
  }
  nodes.push_back(std::move(node));
  return *this;
}

GraphSpec& GraphSpec::add(ObjectSpec object) {
  if (!valid_name(object.name) || object.name == kEnvNode) {
    throw GraphError(GraphErrorCode::invalid_attribute, "invalid object name '" + object.name + "'");
  }
  if (find_node(object.name) || find_object(object.name)) {
    throw GraphError(GraphErrorCode::duplicate_name, "name '" + object.name + "' already used");
  }
  objects.push_back(std::move(object));
  return *this;
}

const char* to_string(GraphErrorCode code) {
  switch (code) {
    case GraphErrorCode::unknown_endpoint: return "UNKNOWN_ENDPOINT";
    case GraphErrorCode::type_mismatch: return "TYPE_MISMATCH";
    case GraphErrorCode::duplicate_edge: return "DUPLICATE_EDGE";
    case GraphErrorCode::cycle_without_skip: return "CYCLE_WITHOUT_SKIP";
    case GraphErrorCode::invalid_attribute: return "INVALID_ATTRIBUTE";
    case GraphErrorCode::duplicate_name: return "DUPLICATE_NAME";
    case GraphErrorCode::unsupported_engine: return "UNSUPPORTED_ENGINE";
  }
  return "?";
}

EndpointRef EndpointRef::parse(std::string_view text) {
  const auto bad = [&] {
    return GraphError(GraphErrorCode::unknown_endpoint, "malformed endpoint '" + std::string(text) + "'");
  };
  const auto first = text.find('.');
  if (first == std::string_view::npos) throw bad();
  const std::string_view head = text.substr(0, first);
  const std::string_view rest = text.substr(first + 1);
  if (head == "actions" || head == "observations") {
    if (!valid_name(rest)) throw bad();
    return EndpointRef{head == "actions" ? EndpointKind::action : EndpointKind::observation, "",
                       std::string(rest)};
  }
  const auto second = rest.find('.');
  if (second == std::string_view::npos) throw bad();
  const std::string_view group = rest.substr(0, second);
  const std::string_view port = rest.substr(second + 1);
  if (!valid_name(head) || !valid_name(port)) throw bad();
  EndpointKind kind;
  if (group == "outputs") {
    kind = EndpointKind::node_output;
  } else if (group == "inputs") {
    kind = EndpointKind::node_input;
  } else if (group == "sensors") {
    kind = EndpointKind::sensor;
  } else if (group == "actuators") {
    kind = EndpointKind::actuator;
  } else {
    throw bad();
  }
  return EndpointRef{kind, std::string(head), std::string(port)};
}

std::string EndpointRef::str() const {
  switch (kind) {
    case EndpointKind::node_output: return owner + ".outputs." + port;
    case EndpointKind::node_input: return owner + ".inputs." + port;
    case EndpointKind::sensor: return owner + ".sensors." + port;
    case EndpointKind::actuator: return owner + ".actuators." + port;
    case EndpointKind::action: return "actions." + port;
    case EndpointKind::observation: return "observations." + port;
  }
  return {};
}

bool EndpointRef::is_source() const {
  return kind == EndpointKind::node_output || kind == EndpointKind::sensor ||
         kind == EndpointKind::action;
}

GraphSpec connect(GraphSpec graph, const EdgeSpec& edge) {
  if (!std::isfinite(edge.delay) || edge.delay < 0.0) {
    throw GraphError(GraphErrorCode::invalid_attribute,
                     "delay must be >= 0 on " + edge.source + " -> " + edge.target);
  }
  if (edge.window < 1) {
    throw GraphError(GraphErrorCode::invalid_attribute,
                     "window must be >= 1 on " + edge.source + " -> " + edge.target);
  }
  const EndpointRef src = EndpointRef::parse(edge.source);
  const EndpointRef dst = EndpointRef::parse(edge.target);
  if (!src.is_source()) {
    throw GraphError(GraphErrorCode::unknown_endpoint, "'" + edge.source + "' is not a source");
  }
  if (dst.is_source()) {
    throw GraphError(GraphErrorCode::unknown_endpoint, "'" + edge.target + "' is not a target");
  }

  const auto size_of = [&](const EndpointRef& r, const std::string& text) -> std::optional<int> {
    const auto unknown = [&] {
      return GraphError(GraphErrorCode::unknown_endpoint, "unknown endpoint '" + text + "'");
    };
    switch (r.kind) {
      case EndpointKind::node_output:
      case EndpointKind::node_input: {
        const NodeDecl* n = graph.find_node(r.owner);
        if (!n) throw unknown();
        auto s = port_size(r.kind == EndpointKind::node_output ? n->outputs : n->inputs, r.port);
        if (!s) throw unknown();
        return s;
      }
      case EndpointKind::sensor:
      case EndpointKind::actuator: {
        const ObjectSpec* o = graph.find_object(r.owner);
        if (!o) throw unknown();
        const ObjectChannel* c =
            find_channel(r.kind == EndpointKind::sensor ? o->sensors : o->actuators, r.port);
        if (!c) throw unknown();
        return c->size;
      }
      case EndpointKind::action: return port_size(graph.actions, r.port);
      case EndpointKind::observation: return port_size(graph.observations, r.port);
    }
    return std::nullopt;
  };

  const auto src_size = size_of(src, edge.source);
  const auto dst_size = size_of(dst, edge.target);
  if (src_size && dst_size && *src_size != *dst_size) {
    throw GraphError(GraphErrorCode::type_mismatch,
                     edge.source + " has size " + std::to_string(*src_size) + ", " + edge.target +
                         " has size " + std::to_string(*dst_size));
  }
  const int size = src_size.value_or(dst_size.value_or(1));

  for (const EdgeSpec& e : graph.edges) {
    if (EndpointRef::parse(e.source).str() == src.str() &&
        EndpointRef::parse(e.target).str() == dst.str()) {
      throw GraphError(GraphErrorCode::duplicate_edge,
                       "edge " + src.str() + " -> " + dst.str() + " already exists");
    }
  }

  if (!edge.skip) {
    std::map<std::string, std::vector<std::string>> adj;
    for (const EdgeSpec& e : graph.edges) {
      if (e.skip) continue;
      adj[source_vertex(EndpointRef::parse(e.source))].push_back(
          target_vertex(EndpointRef::parse(e.target)));
    }
    for (const ObjectSpec& o : graph.objects) {
      if (!o.actuators_cyclic) adj["o:" + o.name + ":in"].push_back("o:" + o.name + ":out");
    }
    const std::string from = target_vertex(dst);
    const std::string goal = source_vertex(src);
    std::set<std::string> seen;
    std::vector<std::string> stack{from};
    bool cycle = false;
    while (!stack.empty() && !cycle) {
      const std::string v = stack.back();
      stack.pop_back();
      if (v == goal) cycle = true;
      if (!seen.insert(v).second) continue;
      for (const auto& w : adj[v]) stack.push_back(w);
    }
    if (cycle) {
      throw GraphError(GraphErrorCode::cycle_without_skip,
                       src.str() + " -> " + dst.str() +
                           " closes a cycle with no skip edge; set skip=true on one of its edges");
    }
  }

  if (src.kind == EndpointKind::action && !src_size) {
    graph.actions.push_back(PortSpec{src.port, size});
  }
  if (dst.kind == EndpointKind::observation && !dst_size) {
    graph.observations.push_back(PortSpec{dst.port, size});
  }
  EdgeSpec stored = edge;
  stored.source = src.str();
  stored.target = dst.str();
  graph.edges.push_back(std::move(stored));
  return graph;
}

const ConcreteNode* ConcreteGraph::find(std::string_view name) const {
  for (const auto& n : nodes) {
    if (n.spec.name == name) return &n;
  }
  return nullptr;
}

ConcreteNode* ConcreteGraph::find(std::string_view name) {
  for (auto& n : nodes) {
    if (n.spec.name == name) return &n;
  }
  return nullptr;
}

namespace {

NodeSpec to_node_spec(const NodeDecl& d) {
  NodeSpec spec;
  spec.name = d.name;
  spec.kind = d.kind;
  spec.rate = d.rate;
  for (const PortSpec& p : d.inputs) {
    ChannelSpec ch;
    ch.name = p.name;
    ch.size = p.size;
    spec.inputs.push_back(ch);
  }
  for (const PortSpec& p : d.outputs) spec.outputs.push_back(OutputSpec{p.name, p.size});
  spec.states = d.states;
  spec.params = d.params;
  return spec;
}

}  // namespace

ConcreteGraph resolve(const GraphSpec& graph, const EngineSpec& engine, const Registry& registry) {
  if (!std::isfinite(engine.rate) || engine.rate <= 0.0) {
    throw GraphError(GraphErrorCode::invalid_attribute, "engine rate must be > 0");
  }
  ConcreteGraph out;
  out.engine = engine;
  out.actions = graph.actions;
  out.observations = graph.observations;

  for (const NodeDecl& d : graph.nodes) {
    out.nodes.push_back(ConcreteNode{to_node_spec(d), ""});
    for (const auto& s : d.states) out.state_paths.push_back({d.name + "/" + s, {d.name, s}});
  }

  NodeSpec env;
  env.name = kEnvNode;
  env.kind = "environment";
  env.rate = graph.env_rate;
  for (const PortSpec& p : graph.observations) {
    ChannelSpec ch;
    ch.name = p.name;
    ch.size = p.size;
    env.inputs.push_back(ch);
  }
  for (const PortSpec& p : graph.actions) env.outputs.push_back(OutputSpec{p.name, p.size});
  out.nodes.push_back(ConcreteNode{std::move(env), kEnvNode});

  std::map<std::string, Subgraph> subgraphs;
  for (const ObjectSpec& o : graph.objects) {
    const SubgraphFactory* factory = registry.subgraph(o.kind, engine.id);
    if (!factory) {
      std::string avail;
      for (const auto& e : registry.engines_for(o.kind)) avail += (avail.empty() ? "" : ", ") + e;
      throw GraphError(GraphErrorCode::unsupported_engine,
                       "object '" + o.name + "' (" + o.kind + ") has no subgraph for engine '" +
                           engine.id + "'; available: " + (avail.empty() ? "none" : avail));
    }
    Subgraph sub = (*factory)(o, engine);
    for (NodeSpec& n : sub.nodes) out.nodes.push_back(ConcreteNode{std::move(n), o.name});
    for (const auto& s : o.states) out.state_paths.push_back({o.name + "/" + s, {sub.state_node, s}});
    subgraphs.emplace(o.name, std::move(sub));
  }

  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    const EdgeSpec& e = graph.edges[i];
    const EndpointRef src = EndpointRef::parse(e.source);
    const EndpointRef dst = EndpointRef::parse(e.target);
    ConcreteEdge ce;
    ce.delay = e.delay;
    ce.window = e.window;
    ce.skip = e.skip;
    ce.agnostic_edge = i;

    bool enabled = true;
    const auto map_object = [&](const EndpointRef& r, bool sensor) -> std::pair<std::string, std::string> {
      const ObjectSpec* o = graph.find_object(r.owner);
      const Subgraph* sub = o ? &subgraphs.at(o->name) : nullptr;
      const auto& table = sensor ? sub->sensors : sub->actuators;
      const ObjectChannel* ch = o ? find_channel(sensor ? o->sensors : o->actuators, r.port) : nullptr;
      if (!ch) throw GraphError(GraphErrorCode::unknown_endpoint, "unknown endpoint '" + r.str() + "'");
      if (!ch->enabled_for(engine.id)) {
        enabled = false;
        return {};
      }
      auto it = table.find(r.port);
      if (it == table.end()) {
        throw GraphError(GraphErrorCode::unknown_endpoint,
                         "engine '" + engine.id + "' subgraph of '" + o->name + "' lacks '" + r.port + "'");
      }
      if (!sensor && o->actuators_cyclic) ce.skip = true;
      return it->second;
    };

    switch (src.kind) {
      case EndpointKind::node_output: std::tie(ce.source_node, ce.source_port) = std::pair{src.owner, src.port}; break;
      case EndpointKind::sensor: std::tie(ce.source_node, ce.source_port) = map_object(src, true); break;
      default: std::tie(ce.source_node, ce.source_port) = std::pair{std::string(kEnvNode), src.port}; break;
    }
    switch (dst.kind) {
      case EndpointKind::node_input: std::tie(ce.target_node, ce.target_port) = std::pair{dst.owner, dst.port}; break;
      case EndpointKind::actuator: std::tie(ce.target_node, ce.target_port) = map_object(dst, false); break;
      default: std::tie(ce.target_node, ce.target_port) = std::pair{std::string(kEnvNode), dst.port}; break;
    }
    if (enabled) out.edges.push_back(std::move(ce));
  }
  for (auto& [name, sub] : subgraphs) {
    for (auto& e : sub.edges) out.edges.push_back(std::move(e));
  }

  bind_channels(out);
  return out;
}

void bind_channels(ConcreteGraph& graph) {
  for (const ConcreteEdge& e : graph.edges) {
    ConcreteNode* dst = graph.find(e.target_node);
    const ConcreteNode* src = graph.find(e.source_node);
    if (!dst || !src) continue;
    auto idx = dst->spec.input_index(e.target_port);
    if (!idx) continue;
    ChannelSpec& ch = dst->spec.inputs[*idx];
    ch.source = e.source_node + "/" + e.source_port;
    ch.producer_rate = src->spec.rate;
    ch.delay = e.delay;
    ch.window = e.window;
    ch.cyclic = e.skip;
  }
}

std::vector<Diagnostic> validate(const ConcreteGraph& graph) {
  std::vector<Diagnostic> out;
  const auto emit = [&](std::string code, std::string message, std::vector<std::string> subjects,
                        Severity sev = Severity::error) {
    out.push_back(Diagnostic{std::move(code), sev, std::move(message), std::move(subjects)});
  };

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const NodeSpec& n = graph.nodes[i].spec;
    if (!index.emplace(n.name, i).second) {
      emit("DUPLICATE_NAME", "node name '" + n.name + "' used twice", {n.name});
    }
    if (!std::isfinite(n.rate) || n.rate <= 0.0) {
      emit("NODE_RATE_INVALID", "node '" + n.name + "' has rate " + std::to_string(n.rate), {n.name});
    }
    if (n.inputs.empty()) {
      emit("NODE_NO_INPUT", "node '" + n.name + "' has no input channel", {n.name});
    }
  }

  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> incoming;
  std::map<std::pair<std::string, std::string>, std::size_t> outgoing;
  std::vector<bool> edge_ok(graph.edges.size(), false);
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    const ConcreteEdge& e = graph.edges[i];
    const std::string label = edge_label(e);
    const ConcreteNode* src = graph.find(e.source_node);
    const ConcreteNode* dst = graph.find(e.target_node);
    const auto out_idx = src ? src->spec.output_index(e.source_port) : std::nullopt;
    const auto in_idx = dst ? dst->spec.input_index(e.target_port) : std::nullopt;
    if (!out_idx || !in_idx) {
      emit("UNKNOWN_ENDPOINT", "edge " + label + " refers to a missing node or port", {label});
      continue;
    }
    edge_ok[i] = true;
    if (!std::isfinite(e.delay) || e.delay < 0.0 || e.window < 1) {
      emit("INVALID_ATTRIBUTE", "edge " + label + " has delay < 0 or window < 1", {label});
    }
    if (src->spec.outputs[*out_idx].size != dst->spec.inputs[*in_idx].size) {
      emit("TYPE_MISMATCH", "edge " + label + " joins ports of different size", {label});
    }
    const double ratio = src->spec.rate / dst->spec.rate;
    if (std::isfinite(ratio) && ratio > kRateRatioWarning) {
      emit("RATE_RATIO_HIGH", "edge " + label + " feeds " + std::to_string(ratio) + " messages per callback",
           {label}, Severity::warning);
    }
    incoming[{e.target_node, e.target_port}].push_back(i);
    ++outgoing[{e.source_node, e.source_port}];
  }

  for (const ConcreteNode& n : graph.nodes) {
    const bool env = n.spec.name == kEnvNode;
    for (const ChannelSpec& ch : n.spec.inputs) {
      const auto it = incoming.find({n.spec.name, ch.name});
      const std::size_t count = it == incoming.end() ? 0 : it->second.size();
      const std::string subject = n.spec.name + "." + ch.name;
      if (count == 0) {
        if (env) {
          emit("OBSERVATION_NO_SOURCE", "observation '" + ch.name + "' has no source", {subject});
        } else {
          emit("DANGLING_INPUT", "input " + subject + " is not connected", {subject});
        }
      } else if (count > 1) {
        emit("MULTIPLE_SOURCES", "input " + subject + " has " + std::to_string(count) + " sources",
             {subject});
      }
    }
    if (env) {
      for (const OutputSpec& o : n.spec.outputs) {
        if (!outgoing.count({n.spec.name, o.name})) {
          emit("ACTION_NO_TARGET", "action '" + o.name + "' has no target", {kEnvNode + std::string(".") + o.name});
        }
      }
    }
  }

  // Tarjan over non-skip edges; every non-trivial SCC (or self loop) is a cycle
  // nothing can bootstrap.
  const std::size_t n = graph.nodes.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    const ConcreteEdge& e = graph.edges[i];
    if (!edge_ok[i] || e.skip) continue;
    adj[index.at(e.source_node)].push_back(index.at(e.target_node));
  }
  std::vector<int> order(n, -1), low(n, 0), comp(n, -1);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  int counter = 0;
  int comps = 0;
  std::function<void(std::size_t)> strongconnect = [&](std::size_t v) {
    order[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (std::size_t w : adj[v]) {
      if (order[w] < 0) {
        strongconnect(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], order[w]);
      }
    }
    if (low[v] == order[v]) {
      std::size_t w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        comp[w] = comps;
      } while (w != v);
      ++comps;
    }
  };
  for (std::size_t v = 0; v < n; ++v) {
    if (order[v] < 0) strongconnect(v);
  }
  std::map<int, std::vector<std::string>> cyc;
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    const ConcreteEdge& e = graph.edges[i];
    if (!edge_ok[i] || e.skip) continue;
    const int a = comp[index.at(e.source_node)];
    if (a == comp[index.at(e.target_node)]) cyc[a].push_back(edge_label(e));
  }
  for (auto& [c, edges] : cyc) {
    emit("CYCLE_WITHOUT_SKIP", "cycle with no skip edge: " + edges.front() +
                                   (edges.size() > 1 ? " (+" + std::to_string(edges.size() - 1) + " more)" : ""),
         edges);
  }
  return out;
}

bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(),
                     [](const Diagnostic& d) { return d.severity == Severity::error; });
}

std::string snapshot(const ConcreteGraph& graph) {
  std::ostringstream os;
  os << "engine " << graph.engine.id << " rate=" << graph.engine.rate
     << " rtf=" << graph.engine.real_time_factor << " sync=" << (graph.engine.sync ? 1 : 0) << '\n';

  std::vector<const ConcreteNode*> nodes;
  for (const auto& n : graph.nodes) nodes.push_back(&n);
  std::sort(nodes.begin(), nodes.end(),
            [](const ConcreteNode* a, const ConcreteNode* b) { return a->spec.name < b->spec.name; });
  for (const ConcreteNode* n : nodes) {
    os << "node " << n->spec.name << " kind=" << n->spec.kind << " rate=" << n->spec.rate;
    if (!n->origin.empty()) os << " origin=" << n->origin;
    os << '\n';
    for (const ChannelSpec& ch : n->spec.inputs) {
      os << "  in " << ch.name << " size=" << ch.size << '\n';
    }
    for (const OutputSpec& o : n->spec.outputs) {
      os << "  out " << o.name << " size=" << o.size << '\n';
    }
  }

  std::vector<std::string> edges;
  for (const ConcreteEdge& e : graph.edges) {
    std::ostringstream line;
    line << "edge " << edge_label(e) << " delay=" << e.delay << " window=" << e.window
         << " skip=" << (e.skip ? 1 : 0);
    edges.push_back(line.str());
  }
  std::sort(edges.begin(), edges.end());
  for (const auto& e : edges) os << e << '\n';
  return os.str();
}

}  // namespace syncflow

#include "syncflow/graph_io.hpp"

#include <fstream>

#include "syncflow/errors.hpp"

namespace syncflow {

using nlohmann::json;

namespace {

json ports_json(const std::vector<PortSpec>& ports) {
  json a = json::array();
  for (const auto& p : ports) a.push_back({{"name", p.name}, {"size", p.size}});
  return a;
}

std::vector<PortSpec> ports_from(const json& j, const char* key) {
  std::vector<PortSpec> out;
  for (const auto& p : j.value(key, json::array())) {
    out.push_back(PortSpec{p.at("name").get<std::string>(), p.value("size", 1)});
  }
  return out;
}

json channels_json(const std::vector<ObjectChannel>& chans) {
  json a = json::array();
  for (const auto& c : chans) {
    a.push_back({{"name", c.name}, {"rate", c.rate}, {"size", c.size}, {"engines", c.engines}});
  }
  return a;
}

std::vector<ObjectChannel> channels_from(const json& j, const char* key) {
  std::vector<ObjectChannel> out;
  for (const auto& c : j.value(key, json::array())) {
    out.push_back(ObjectChannel{c.at("name").get<std::string>(), c.value("rate", 0.0), c.value("size", 1),
                                c.value("engines", std::vector<std::string>{})});
  }
  return out;
}

}  // namespace

json to_json(const GraphDocument& doc) {
  const GraphSpec& g = doc.graph;
  json j;
  j["schema_version"] = kGraphSchemaVersion;
  j["env_rate"] = g.env_rate;
  j["engine"] = {{"id", doc.engine.id},
                 {"rate", doc.engine.rate},
                 {"real_time_factor", doc.engine.real_time_factor},
                 {"sync", doc.engine.sync}};
  j["nodes"] = json::array();
  for (const NodeDecl& n : g.nodes) {
    j["nodes"].push_back({{"name", n.name},
                          {"kind", n.kind},
                          {"rate", n.rate},
                          {"inputs", ports_json(n.inputs)},
                          {"outputs", ports_json(n.outputs)},
                          {"states", n.states},
                          {"params", n.params}});
  }
  j["objects"] = json::array();
  for (const ObjectSpec& o : g.objects) {
    j["objects"].push_back({{"name", o.name},
                            {"kind", o.kind},
                            {"sensors", channels_json(o.sensors)},
                            {"actuators", channels_json(o.actuators)},
                            {"states", o.states},
                            {"params", o.params},
                            {"actuators_cyclic", o.actuators_cyclic}});
  }
  j["actions"] = ports_json(g.actions);
  j["observations"] = ports_json(g.observations);
  j["edges"] = json::array();
  for (const EdgeSpec& e : g.edges) {
    j["edges"].push_back({{"source", e.source},
                          {"target", e.target},
                          {"delay", e.delay},
                          {"window", e.window},
                          {"skip", e.skip}});
  }
  return j;
}

GraphDocument graph_document_from_json(const json& j) {
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kGraphSchemaVersion) {
      throw ConfigError("unsupported graph schema_version " + std::to_string(version) + " (expected " +
                        std::to_string(kGraphSchemaVersion) + ")");
    }
    GraphDocument doc;
    GraphSpec& g = doc.graph;
    g.env_rate = j.at("env_rate").get<double>();
    if (j.contains("engine")) {
      const json& e = j["engine"];
      doc.engine.id = e.value("id", doc.engine.id);
      doc.engine.rate = e.value("rate", doc.engine.rate);
      doc.engine.real_time_factor = e.value("real_time_factor", doc.engine.real_time_factor);
      doc.engine.sync = e.value("sync", doc.engine.sync);
    }
    for (const auto& n : j.value("nodes", json::array())) {
      NodeDecl d;
      d.name = n.at("name").get<std::string>();
      d.kind = n.at("kind").get<std::string>();
      d.rate = n.at("rate").get<double>();
      d.inputs = ports_from(n, "inputs");
      d.outputs = ports_from(n, "outputs");
      d.states = n.value("states", std::vector<std::string>{});
      d.params = n.value("params", json::object());
      g.add(std::move(d));
    }
    for (const auto& o : j.value("objects", json::array())) {
      ObjectSpec s;
      s.name = o.at("name").get<std::string>();
      s.kind = o.at("kind").get<std::string>();
      s.sensors = channels_from(o, "sensors");
      s.actuators = channels_from(o, "actuators");
      s.states = o.value("states", std::vector<std::string>{});
      s.params = o.value("params", json::object());
      s.actuators_cyclic = o.value("actuators_cyclic", true);
      g.add(std::move(s));
    }
    g.actions = ports_from(j, "actions");
    g.observations = ports_from(j, "observations");
    for (const auto& e : j.value("edges", json::array())) {
      EdgeSpec edge;
      edge.source = e.at("source").get<std::string>();
      edge.target = e.at("target").get<std::string>();
      edge.delay = e.value("delay", 0.0);
      edge.window = e.value("window", std::size_t{1});
      edge.skip = e.value("skip", false);
      g = connect(std::move(g), edge);
    }
    return doc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed graph document: ") + e.what());
  } catch (const GraphError& e) {
    throw ConfigError(std::string("invalid graph document: ") + e.what());
  }
}

GraphDocument load_graph_document(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open graph file '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse '" + path.string() + "': " + e.what());
  }
  return graph_document_from_json(j);
}

void save_graph_document(const GraphDocument& doc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write graph file '" + path.string() + "'");
  out << to_json(doc).dump(2) << '\n';
}

}  // namespace syncflow

#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "syncflow/graph.hpp"

namespace syncflow {

inline constexpr int kGraphSchemaVersion = 1;

/// A graph file: the agnostic graph plus the engine it runs on.
struct GraphDocument {
  GraphSpec graph;
  EngineSpec engine;
  friend bool operator==(const GraphDocument&, const GraphDocument&) = default;
};

nlohmann::json to_json(const GraphDocument& doc);
/// Throws ConfigError on schema errors; edges are replayed through connect().
GraphDocument graph_document_from_json(const nlohmann::json& j);

GraphDocument load_graph_document(const std::filesystem::path& path);
void save_graph_document(const GraphDocument& doc, const std::filesystem::path& path);

}  // namespace syncflow

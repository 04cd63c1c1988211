// SPDX-License-Identifier: Apache-2.0
//
// JSON form shared by every CLI output:
//   { "n": int, "edges": [[u, v], ...], "undirected": [[u, v], ...] }

#pragma once

#include <filesystem>

#include <json.hpp>

#include "argcd/graph.hpp"

namespace argcd {

nlohmann::json graph_to_json(const Dag& g);
nlohmann::json graph_to_json(const Pdag& g);

/// Accepts an optional "undirected" member; it must be empty for a Dag.
Dag dag_from_json(const nlohmann::json& j);
Pdag pdag_from_json(const nlohmann::json& j);

Dag read_dag(const std::filesystem::path& path);
Pdag read_pdag(const std::filesystem::path& path);

}  // namespace argcd

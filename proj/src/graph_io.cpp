// SPDX-License-Identifier: Apache-2.0

#include "argcd/graph_io.hpp"

#include <fstream>

namespace argcd {

namespace {

nlohmann::json pairs(const std::vector<Edge>& edges) {
  auto out = nlohmann::json::array();
  for (auto [u, v] : edges) out.push_back({u, v});
  return out;
}

std::vector<Edge> read_pairs(const nlohmann::json& j, const char* key) {
  std::vector<Edge> out;
  if (!j.contains(key)) return out;
  for (const auto& e : j.at(key)) {
    if (!e.is_array() || e.size() != 2) throw GraphError(std::string("malformed pair in '") + key + "'");
    out.emplace_back(e[0].get<int>(), e[1].get<int>());
  }
  return out;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot open graph file " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw GraphError("invalid graph JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace

nlohmann::json graph_to_json(const Dag& g) {
  return {{"n", g.size()}, {"edges", pairs(g.edges())}, {"undirected", nlohmann::json::array()}};
}

nlohmann::json graph_to_json(const Pdag& g) {
  return {{"n", g.size()}, {"edges", pairs(g.directed())}, {"undirected", pairs(g.undirected())}};
}

Dag dag_from_json(const nlohmann::json& j) {
  auto p = pdag_from_json(j);
  if (!p.undirected().empty()) throw GraphError("expected a DAG but found undirected edges");
  return Dag(p.size(), p.directed());
}

Pdag pdag_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("n")) throw GraphError("graph JSON needs an object with 'n'");
  return Pdag(j.at("n").get<int>(), read_pairs(j, "edges"), read_pairs(j, "undirected"));
}

Dag read_dag(const std::filesystem::path& path) { return dag_from_json(read_json(path)); }

Pdag read_pdag(const std::filesystem::path& path) { return pdag_from_json(read_json(path)); }

}  // namespace argcd

// SPDX-License-Identifier: Apache-2.0
//
// Cause-effect knowledge graphs and directed induced sub-graph matching.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "argcd/graph.hpp"

namespace argcd {

class KnowledgeGraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lowercase, trimmed, inner whitespace collapsed to single spaces.
std::string normalize_concept(std::string_view name);

/// Concepts are sorted by name, so the index of a concept does not depend
/// on the order in which edges were read.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  /// Names must already be normalised; duplicates and self-loops are rejected.
  KnowledgeGraph(std::vector<std::string> concepts, std::vector<Edge> edges);

  int size() const noexcept { return static_cast<int>(concepts_.size()); }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  const std::vector<std::string>& concepts() const noexcept { return concepts_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::string& name(Node v) const { return concepts_.at(v); }
  /// -1 when absent.
  Node index_of(std::string_view normalized_name) const;

  bool has_edge(Node u, Node v) const;
  const std::vector<Node>& successors(Node v) const { return out_[v]; }
  const std::vector<Node>& predecessors(Node v) const { return in_[v]; }
  /// In-degree plus out-degree.
  int degree(Node v) const { return static_cast<int>(out_[v].size() + in_[v].size()); }

 private:
  std::vector<std::string> concepts_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Node>> out_;
  std::vector<std::vector<Node>> in_;
};

struct KgLoadReport {
  std::size_t lines = 0;
  std::size_t duplicates = 0;
  std::size_t self_loops = 0;
  std::size_t malformed = 0;
  std::vector<std::string> warnings;
};

/// Builds a graph from named cause/effect pairs after normalisation,
/// counting dropped duplicates and self-loops in `report`.
KnowledgeGraph make_knowledge_graph(const std::vector<std::pair<std::string, std::string>>& edges,
                                    KgLoadReport* report = nullptr);

enum class KgFormat { tsv, causenet_jsonl };

KgFormat kg_format_from(const std::string& name);

/// TSV rows are "cause<TAB>effect". JSONL records carry either top-level
/// "cause"/"effect" strings or the nested causal_relation.{cause,effect}.concept
/// fields of the CauseNet dump. Malformed lines are skipped; an empty result throws.
KnowledgeGraph load_knowledge_graph(const std::filesystem::path& path, KgFormat format,
                                    KgLoadReport* report = nullptr);

/// mapping[i] is the concept assigned to pattern node i.
using Mapping = std::vector<Node>;

/// Injective, and for every ordered pattern pair (u, v) the edge u -> v
/// exists iff mapping[u] -> mapping[v] exists in the graph.
bool is_induced_match(const Dag& pattern, const KnowledgeGraph& kg, const Mapping& mapping);

/// Backtracking enumeration of directed induced matches. Pattern nodes are
/// visited in a connectivity-first order; concepts for a node with a mapped
/// neighbour come from that neighbour's adjacency, while the candidates for a
/// component root are tried in a seeded shuffled order. Stops after `cap`.
std::vector<Mapping> enumerate_isomorphisms(const Dag& pattern, const KnowledgeGraph& kg, std::size_t cap,
                                            std::uint64_t seed);

}  // namespace argcd

// SPDX-License-Identifier: Apache-2.0
//
// Directed and partially directed graphs over dense node indices, plus the
// graphical primitives the rest of the library is built on: acyclicity,
// reachability, d-separation and Meek orientation closure.

#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace argcd {

using Node = int;
using Edge = std::pair<Node, Node>;
/// Sorted, duplicate-free list of nodes.
using NodeSet = std::vector<Node>;

class GraphError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Returns `nodes` sorted with duplicates removed.
NodeSet make_node_set(std::vector<Node> nodes);

/// True iff a topological order exists for the edge set on `n` nodes.
/// Endpoints outside [0, n) make the result false.
bool is_acyclic(int n, std::span<const Edge> edges);

/// Immutable directed acyclic graph. Construction validates range,
/// self-loops, duplicates, 2-cycles and acyclicity.
class Dag {
 public:
  Dag() = default;
  explicit Dag(int n);
  Dag(int n, std::vector<Edge> edges);

  int size() const noexcept { return n_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  /// Edges in lexicographic order.
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  bool has_edge(Node u, Node v) const;
  bool adjacent(Node u, Node v) const { return has_edge(u, v) || has_edge(v, u); }
  const std::vector<Node>& parents(Node v) const { return parents_.at(v); }
  const std::vector<Node>& children(Node v) const { return children_.at(v); }

  std::vector<Node> topological_order() const;

  /// Copy of this graph with every edge leaving `v` removed.
  Dag without_outgoing(Node v) const;

  friend bool operator==(const Dag& a, const Dag& b) {
    return a.n_ == b.n_ && a.edges_ == b.edges_;
  }

 private:
  int n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<Node>> parents_;
  std::vector<std::vector<Node>> children_;
};

NodeSet descendants(const Dag& g, Node x);
NodeSet ancestors(const Dag& g, Node x);

/// Every node (other than `x` and members of `z`) that is d-connected to `x`
/// given `z`. Linear-time reachability over active trails.
NodeSet d_connected_set(const Dag& g, Node x, const NodeSet& z);

/// Throws GraphError when x == y or either endpoint lies in z.
bool d_separated(const Dag& g, Node x, Node y, const NodeSet& z);

/// Partially directed graph. `undirected` pairs are stored as (min, max).
class Pdag {
 public:
  Pdag() = default;
  explicit Pdag(int n);
  Pdag(int n, std::vector<Edge> directed, std::vector<Edge> undirected);

  static Pdag from_dag(const Dag& g);
  static Pdag skeleton_of(const Dag& g);

  int size() const noexcept { return n_; }
  const std::vector<Edge>& directed() const noexcept { return directed_; }
  const std::vector<Edge>& undirected() const noexcept { return undirected_; }
  std::size_t num_edges() const noexcept { return directed_.size() + undirected_.size(); }

  bool has_directed(Node u, Node v) const;
  bool has_undirected(Node u, Node v) const;
  bool adjacent(Node u, Node v) const;
  std::vector<Node> adjacents(Node v) const;

  /// Converts a fully directed, acyclic Pdag; throws GraphError otherwise.
  Dag to_dag() const;

  friend bool operator==(const Pdag& a, const Pdag& b) = default;

 private:
  int n_ = 0;
  std::vector<Edge> directed_;
  std::vector<Edge> undirected_;
};

/// Unshielded triple x - middle - y with x < y.
struct Triple {
  Node x = 0;
  Node middle = 0;
  Node y = 0;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

/// Fixpoint of Meek rules R1-R4. Directed edges of the input are kept. An
/// undirected edge that the rules force in both directions within one sweep
/// is left undirected and reported through `conflicts` (when non-null).
/// Rules that would treat one of the `ambiguous` triples as a non-collider
/// do not fire.
Pdag meek_closure(const Pdag& p, std::vector<Edge>* conflicts = nullptr,
                  std::span<const Triple> ambiguous = {});

}  // namespace argcd

// SPDX-License-Identifier: Apache-2.0

#include "argcd/graph.hpp"

#include <algorithm>
#include <deque>
#include <string>

namespace argcd {

namespace {

void check_node(int n, Node v) {
  if (v < 0 || v >= n) {
    throw GraphError("node " + std::to_string(v) + " out of range [0, " + std::to_string(n) + ")");
  }
}

Edge ordered(Edge e) {
  if (e.first > e.second) std::swap(e.first, e.second);
  return e;
}

}  // namespace

NodeSet make_node_set(std::vector<Node> nodes) {
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  return nodes;
}

bool is_acyclic(int n, std::span<const Edge> edges) {
  if (n < 0) return false;
  std::vector<int> indegree(n, 0);
  std::vector<std::vector<Node>> out(n);
  for (auto [u, v] : edges) {
    if (u < 0 || u >= n || v < 0 || v >= n) return false;
    if (u == v) return false;
    out[u].push_back(v);
    ++indegree[v];
  }
  std::vector<Node> ready;
  for (Node v = 0; v < n; ++v) {
    if (indegree[v] == 0) ready.push_back(v);
  }
  int seen = 0;
  while (!ready.empty()) {
    Node u = ready.back();
    ready.pop_back();
    ++seen;
    for (Node v : out[u]) {
      if (--indegree[v] == 0) ready.push_back(v);
    }
  }
  return seen == n;
}

Dag::Dag(int n) : Dag(n, {}) {}

Dag::Dag(int n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)) {
  if (n < 0) throw GraphError("negative node count");
  for (auto [u, v] : edges_) {
    check_node(n, u);
    check_node(n, v);
    if (u == v) throw GraphError("self-loop on node " + std::to_string(u));
  }
  std::sort(edges_.begin(), edges_.end());
  if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
    throw GraphError("duplicate edge");
  }
  parents_.assign(n, {});
  children_.assign(n, {});
  for (auto [u, v] : edges_) {
    if (std::binary_search(edges_.begin(), edges_.end(), Edge{v, u})) {
      throw GraphError("edge " + std::to_string(u) + "->" + std::to_string(v) +
                       " appears with its reverse");
    }
    children_[u].push_back(v);
    parents_[v].push_back(u);
  }
  for (auto& p : parents_) std::sort(p.begin(), p.end());
  if (!is_acyclic(n, edges_)) throw GraphError("graph contains a directed cycle");
}

bool Dag::has_edge(Node u, Node v) const {
  return std::binary_search(edges_.begin(), edges_.end(), Edge{u, v});
}

std::vector<Node> Dag::topological_order() const {
  std::vector<int> indegree(n_, 0);
  for (auto [u, v] : edges_) ++indegree[v];
  // Min-heap on node index keeps the order canonical.
  std::vector<Node> ready;
  for (Node v = 0; v < n_; ++v) {
    if (indegree[v] == 0) ready.push_back(v);
  }
  std::make_heap(ready.begin(), ready.end(), std::greater<>{});
  std::vector<Node> order;
  order.reserve(n_);
  while (!ready.empty()) {
    std::pop_heap(ready.begin(), ready.end(), std::greater<>{});
    Node u = ready.back();
    ready.pop_back();
    order.push_back(u);
    for (Node v : children_[u]) {
      if (--indegree[v] == 0) {
        ready.push_back(v);
        std::push_heap(ready.begin(), ready.end(), std::greater<>{});
      }
    }
  }
  return order;
}

Dag Dag::without_outgoing(Node v) const {
  check_node(n_, v);
  std::vector<Edge> kept;
  kept.reserve(edges_.size());
  for (const auto& e : edges_) {
    if (e.first != v) kept.push_back(e);
  }
  return Dag(n_, std::move(kept));
}

namespace {

NodeSet reach(const Dag& g, Node x, bool forward) {
  std::vector<char> seen(g.size(), 0);
  std::vector<Node> stack{x};
  while (!stack.empty()) {
    Node u = stack.back();
    stack.pop_back();
    for (Node v : forward ? g.children(u) : g.parents(u)) {
      if (!seen[v]) {
        seen[v] = 1;
        stack.push_back(v);
      }
    }
  }
  NodeSet out;
  for (Node v = 0; v < g.size(); ++v) {
    if (seen[v] && v != x) out.push_back(v);
  }
  return out;
}

}  // namespace

NodeSet descendants(const Dag& g, Node x) {
  check_node(g.size(), x);
  return reach(g, x, true);
}

NodeSet ancestors(const Dag& g, Node x) {
  check_node(g.size(), x);
  return reach(g, x, false);
}

NodeSet d_connected_set(const Dag& g, Node x, const NodeSet& z) {
  const int n = g.size();
  check_node(n, x);
  std::vector<char> in_z(n, 0);
  for (Node v : z) {
    check_node(n, v);
    in_z[v] = 1;
  }
  // Z together with all of its ancestors: a collider is open iff it is here.
  std::vector<char> anc_z(in_z);
  {
    std::vector<Node> stack(z.begin(), z.end());
    while (!stack.empty()) {
      Node u = stack.back();
      stack.pop_back();
      for (Node p : g.parents(u)) {
        if (!anc_z[p]) {
          anc_z[p] = 1;
          stack.push_back(p);
        }
      }
    }
  }
  // State: (node, arrived travelling up from a child = 0 / down from a parent = 1).
  std::vector<char> visited(2 * static_cast<std::size_t>(n), 0);
  std::vector<char> reached(n, 0);
  std::deque<std::pair<Node, int>> queue{{x, 0}};
  visited[2 * x] = 1;
  auto push = [&](Node v, int dir) {
    if (!visited[2 * v + dir]) {
      visited[2 * v + dir] = 1;
      queue.emplace_back(v, dir);
    }
  };
  while (!queue.empty()) {
    auto [v, dir] = queue.front();
    queue.pop_front();
    if (!in_z[v]) reached[v] = 1;
    if (dir == 0) {
      if (in_z[v]) continue;
      for (Node p : g.parents(v)) push(p, 0);
      for (Node c : g.children(v)) push(c, 1);
    } else {
      if (!in_z[v]) {
        for (Node c : g.children(v)) push(c, 1);
      }
      if (anc_z[v]) {
        for (Node p : g.parents(v)) push(p, 0);
      }
    }
  }
  NodeSet out;
  for (Node v = 0; v < n; ++v) {
    if (reached[v] && v != x && !in_z[v]) out.push_back(v);
  }
  return out;
}

bool d_separated(const Dag& g, Node x, Node y, const NodeSet& z) {
  check_node(g.size(), x);
  check_node(g.size(), y);
  if (x == y) throw GraphError("d-separation query needs distinct endpoints");
  if (std::find(z.begin(), z.end(), x) != z.end() || std::find(z.begin(), z.end(), y) != z.end()) {
    throw GraphError("conditioning set overlaps the query endpoints");
  }
  auto connected = d_connected_set(g, x, z);
  return !std::binary_search(connected.begin(), connected.end(), y);
}

Pdag::Pdag(int n) : Pdag(n, {}, {}) {}

Pdag::Pdag(int n, std::vector<Edge> directed, std::vector<Edge> undirected)
    : n_(n), directed_(std::move(directed)), undirected_(std::move(undirected)) {
  if (n < 0) throw GraphError("negative node count");
  for (auto& e : undirected_) {
    check_node(n, e.first);
    check_node(n, e.second);
    if (e.first == e.second) throw GraphError("self-loop in undirected set");
    e = ordered(e);
  }
  for (auto [u, v] : directed_) {
    check_node(n, u);
    check_node(n, v);
    if (u == v) throw GraphError("self-loop in directed set");
  }
  std::sort(directed_.begin(), directed_.end());
  std::sort(undirected_.begin(), undirected_.end());
  if (std::adjacent_find(directed_.begin(), directed_.end()) != directed_.end() ||
      std::adjacent_find(undirected_.begin(), undirected_.end()) != undirected_.end()) {
    throw GraphError("duplicate edge in partially directed graph");
  }
  for (auto [u, v] : directed_) {
    if (std::binary_search(directed_.begin(), directed_.end(), Edge{v, u})) {
      throw GraphError("pair directed in both orientations");
    }
    if (std::binary_search(undirected_.begin(), undirected_.end(), ordered({u, v}))) {
      throw GraphError("pair both directed and undirected");
    }
  }
}

Pdag Pdag::from_dag(const Dag& g) { return Pdag(g.size(), g.edges(), {}); }

Pdag Pdag::skeleton_of(const Dag& g) { return Pdag(g.size(), {}, g.edges()); }

bool Pdag::has_directed(Node u, Node v) const {
  return std::binary_search(directed_.begin(), directed_.end(), Edge{u, v});
}

bool Pdag::has_undirected(Node u, Node v) const {
  return std::binary_search(undirected_.begin(), undirected_.end(), ordered({u, v}));
}

bool Pdag::adjacent(Node u, Node v) const {
  return has_directed(u, v) || has_directed(v, u) || has_undirected(u, v);
}

std::vector<Node> Pdag::adjacents(Node v) const {
  std::vector<Node> out;
  for (auto [a, b] : directed_) {
    if (a == v) out.push_back(b);
    if (b == v) out.push_back(a);
  }
  for (auto [a, b] : undirected_) {
    if (a == v) out.push_back(b);
    if (b == v) out.push_back(a);
  }
  return make_node_set(std::move(out));
}

Dag Pdag::to_dag() const {
  if (!undirected_.empty()) throw GraphError("graph has undirected edges");
  return Dag(n_, directed_);
}

Pdag meek_closure(const Pdag& p, std::vector<Edge>* conflicts, std::span<const Triple> ambiguous) {
  const int n = p.size();
  std::vector<Triple> ambiguous_sorted(ambiguous.begin(), ambiguous.end());
  std::sort(ambiguous_sorted.begin(), ambiguous_sorted.end());
  auto is_ambiguous = [&](Node u, Node middle, Node w) {
    if (ambiguous_sorted.empty()) return false;
    Triple t{std::min(u, w), middle, std::max(u, w)};
    return std::binary_search(ambiguous_sorted.begin(), ambiguous_sorted.end(), t);
  };
  std::vector<std::vector<char>> dir(n, std::vector<char>(n, 0));
  std::vector<std::vector<char>> und(n, std::vector<char>(n, 0));
  std::vector<std::vector<char>> frozen(n, std::vector<char>(n, 0));
  for (auto [u, v] : p.directed()) dir[u][v] = 1;
  for (auto [u, v] : p.undirected()) und[u][v] = und[v][u] = 1;
  auto adj = [&](Node a, Node b) { return dir[a][b] || dir[b][a] || und[a][b]; };

  // Whether the rules force a -> b for the undirected pair a - b.
  auto forced = [&](Node a, Node b) {
    for (Node c = 0; c < n; ++c) {
      if (c == a || c == b) continue;
      if (dir[c][a] && !adj(c, b) && !is_ambiguous(c, a, b)) return true;  // R1
      if (dir[a][c] && dir[c][b]) return true;           // R2
    }
    for (Node c = 0; c < n; ++c) {
      if (c == a || c == b || !und[a][c]) continue;
      for (Node d = 0; d < n; ++d) {
        if (d == a || d == b || d == c) continue;
        if (dir[c][b] && und[a][d] && dir[d][b] && !adj(c, d) && !is_ambiguous(c, a, d)) {
          return true;  // R3
        }
        if (dir[c][d] && dir[d][b] && !adj(c, b) && adj(a, d) && !is_ambiguous(c, a, b)) {
          return true;  // R4
        }
      }
    }
    return false;
  };

  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<Edge> orient;
    for (Node a = 0; a < n; ++a) {
      for (Node b = a + 1; b < n; ++b) {
        if (!und[a][b] || frozen[a][b]) continue;
        bool fwd = forced(a, b);
        bool bwd = forced(b, a);
        if (fwd && bwd) {
          frozen[a][b] = frozen[b][a] = 1;
          if (conflicts) conflicts->emplace_back(a, b);
        } else if (fwd) {
          orient.emplace_back(a, b);
        } else if (bwd) {
          orient.emplace_back(b, a);
        }
      }
    }
    for (auto [a, b] : orient) {
      und[a][b] = und[b][a] = 0;
      dir[a][b] = 1;
      changed = true;
    }
  }

  std::vector<Edge> directed, undirected;
  for (Node a = 0; a < n; ++a) {
    for (Node b = 0; b < n; ++b) {
      if (dir[a][b]) directed.emplace_back(a, b);
      if (a < b && und[a][b]) undirected.emplace_back(a, b);
    }
  }
  return Pdag(n, std::move(directed), std::move(undirected));
}

}  // namespace argcd

// SPDX-License-Identifier: Apache-2.0

#include "argcd/solver.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <set>
#include <sstream>

#include "argcd/graph_io.hpp"

namespace argcd {

const char* to_string(SolverMode mode) {
  return mode == SolverMode::maximize ? "maximize" : "relaxation";
}

SolverMode solver_mode_from(const std::string& name) {
  if (name == "relaxation") return SolverMode::relaxation;
  if (name == "maximize") return SolverMode::maximize;
  throw SolverError("unknown solver mode '" + name + "' (expected relaxation or maximize)");
}

namespace {

Edge unordered(Edge e) {
  if (e.first > e.second) std::swap(e.first, e.second);
  return e;
}

std::vector<Edge> sorted_unique(std::vector<Edge> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

bool contains(const std::vector<Edge>& sorted, Edge e) {
  return std::binary_search(sorted.begin(), sorted.end(), e);
}

}  // namespace

Reduction reduce_skeleton(const std::vector<CiStatement>& facts, int n, double tau_hard) {
  std::set<Edge> removed;
  for (const auto& f : facts) {
    if (f.independent && f.credibility >= tau_hard) removed.insert(unordered({f.x, f.y}));
  }
  Reduction r;
  for (Node u = 0; u < n; ++u) {
    for (Node v = u + 1; v < n; ++v) {
      (removed.count({u, v}) ? r.removed : r.candidates).emplace_back(u, v);
    }
  }
  return r;
}

Reduction reduce_to_skeleton(const Pdag& skeleton) {
  Reduction r;
  for (Node u = 0; u < skeleton.size(); ++u) {
    for (Node v = u + 1; v < skeleton.size(); ++v) {
      (skeleton.adjacent(u, v) ? r.candidates : r.removed).emplace_back(u, v);
    }
  }
  return r;
}

SemanticConstraints apply_semantic_constraints(const Reduction& reduction, const std::vector<Edge>& required_in,
                                               const std::vector<Edge>& forbidden_in) {
  auto removed = sorted_unique(reduction.removed);
  auto candidates = sorted_unique(reduction.candidates);
  auto known_pair = [&](Edge e) {
    auto p = unordered(e);
    return e.first != e.second && (contains(candidates, p) || contains(removed, p));
  };
  auto required = sorted_unique(required_in);
  auto forbidden = sorted_unique(forbidden_in);
  for (const auto& e : required) {
    if (!known_pair(e)) throw SolverError("required arrow over an unknown node pair");
  }
  for (const auto& e : forbidden) {
    if (!known_pair(e)) throw SolverError("forbidden arrow over an unknown node pair");
  }

  SemanticConstraints out;
  auto label = [](Edge e) { return std::to_string(e.first) + "->" + std::to_string(e.second); };
  std::set<Edge> drop_required, drop_forbidden;
  for (const auto& e : required) {
    if (contains(forbidden, e)) {
      drop_required.insert(e);
      drop_forbidden.insert(e);
      out.warnings.push_back("arrow " + label(e) + " is both required and forbidden; dropped from both");
    }
    if (contains(required, {e.second, e.first})) {
      drop_required.insert(e);
      if (e.first < e.second) {
        out.warnings.push_back("arrows " + label(e) + " and " + label({e.second, e.first}) +
                               " are both required; dropped");
      }
    }
    if (contains(removed, unordered(e))) drop_required.insert(e);
  }
  for (const auto& e : required) {
    (drop_required.count(e) ? out.dropped_required : out.required).push_back(e);
  }
  for (const auto& e : forbidden) {
    if (drop_forbidden.count(e)) continue;
    out.forbidden.push_back(e);
    if (contains(removed, unordered(e))) out.vacuous_forbidden.push_back(e);
  }
  return out;
}

void sort_facts(std::vector<CiStatement>& facts) {
  std::stable_sort(facts.begin(), facts.end(), [](const CiStatement& a, const CiStatement& b) {
    if (a.credibility != b.credibility) return a.credibility > b.credibility;
    auto ka = a.key();
    auto kb = b.key();
    if (ka != kb) return ka < kb;
    return a.independent && !b.independent;
  });
}

SolverInput make_solver_input(int n, std::vector<CiStatement> facts, const Reduction& reduction,
                              const SemanticConstraints& constraints, SolverConfig config) {
  SolverInput in;
  in.n = n;
  in.candidate_edges = sorted_unique(reduction.candidates);
  in.removed_edges = sorted_unique(reduction.removed);
  sort_facts(facts);
  in.facts = std::move(facts);
  in.required = constraints.required;
  in.forbidden = constraints.forbidden;
  in.dropped_required = constraints.dropped_required;
  in.config = config;
  return in;
}

void validate_input(const SolverInput& in) {
  if (in.n < 0 || in.n > 64) throw SolverError("solver supports between 0 and 64 nodes");
  auto in_range = [&](Node v) { return v >= 0 && v < in.n; };
  auto check_pairs = [&](const std::vector<Edge>& pairs, const char* what) {
    for (auto [u, v] : pairs) {
      if (!in_range(u) || !in_range(v) || u >= v) {
        throw SolverError(std::string(what) + " must hold pairs (u, v) with u < v inside the node range");
      }
    }
    if (sorted_unique(pairs).size() != pairs.size()) throw SolverError(std::string("duplicate ") + what);
  };
  check_pairs(in.candidate_edges, "candidate edges");
  check_pairs(in.removed_edges, "removed edges");
  auto candidates = sorted_unique(in.candidate_edges);
  for (const auto& e : in.removed_edges) {
    if (contains(candidates, e)) throw SolverError("a pair is both candidate and removed");
  }
  auto forbidden = sorted_unique(in.forbidden);
  for (const auto& e : in.required) {
    if (!in_range(e.first) || !in_range(e.second) || !contains(candidates, unordered(e))) {
      throw SolverError("required arrow is not an orientation of a candidate edge");
    }
    if (contains(forbidden, e)) throw SolverError("arrow is both required and forbidden");
  }
  for (const auto& e : in.forbidden) {
    if (!in_range(e.first) || !in_range(e.second) || e.first == e.second) {
      throw SolverError("forbidden arrow outside the node range");
    }
  }
  for (const auto& f : in.facts) {
    if (!in_range(f.x) || !in_range(f.y) || f.x >= f.y) throw SolverError("fact endpoints are not canonical");
    for (Node v : f.z) {
      if (!in_range(v) || v == f.x || v == f.y) throw SolverError("fact conditioning set is invalid");
    }
  }
}

namespace {

using Mask = std::uint64_t;

constexpr Mask bit(int v) { return Mask{1} << v; }

/// Nodes d-connected to x given z in the graph described by parent/child masks.
Mask active_reach(const Mask* par, const Mask* chi, Node x, Mask z) {
  Mask anc = z;
  Mask frontier = z;
  while (frontier) {
    Mask next = 0;
    for (Mask f = frontier; f; f &= f - 1) next |= par[std::countr_zero(f)];
    next &= ~anc;
    anc |= next;
    frontier = next;
  }
  Mask up = bit(x), down = 0;
  Mask up_front = up, down_front = 0;
  while (up_front | down_front) {
    Mask nu = 0, nd = 0;
    for (Mask f = up_front & ~z; f; f &= f - 1) {
      int v = std::countr_zero(f);
      nu |= par[v];
      nd |= chi[v];
    }
    for (Mask f = down_front & ~z; f; f &= f - 1) nd |= chi[std::countr_zero(f)];
    for (Mask f = down_front & anc; f; f &= f - 1) nu |= par[std::countr_zero(f)];
    up_front = nu & ~up;
    down_front = nd & ~down;
    up |= nu;
    down |= nd;
  }
  return (up | down) & ~z & ~bit(x);
}

struct CompiledFact {
  Node x = 0;
  Node y = 0;
  Mask z = 0;
  bool independent = false;
  std::int64_t weight = 0;
};

enum Value : int { kAbsent = 0, kForward = 1, kBackward = 2 };

class Search {
 public:
  Search(const SolverInput& in, const std::vector<CiStatement>& facts)
      : n_(in.n), edges_(sorted_unique(in.candidate_edges)), budget_(in.config.time_budget_s) {
    const auto required = sorted_unique(in.required);
    const auto forbidden = sorted_unique(in.forbidden);
    for (const auto& [u, v] : edges_) {
      std::uint8_t dom = 0b111;
      if (contains(required, {u, v})) dom = 1u << kForward;
      if (contains(required, {v, u})) dom = 1u << kBackward;
      if (contains(forbidden, {u, v})) dom &= ~(1u << kForward);
      if (contains(forbidden, {v, u})) dom &= ~(1u << kBackward);
      domain_.push_back(dom);
    }
    for (const auto& f : facts) {
      CompiledFact c;
      c.x = f.x;
      c.y = f.y;
      for (Node v : f.z) c.z |= bit(v);
      c.independent = f.independent;
      c.weight = static_cast<std::int64_t>(std::llround(std::clamp(f.credibility, 0.0, 1.0) * 1e9));
      total_weight_ += c.weight;
      facts_.push_back(c);
    }
    reset_graph();
  }

  void run_relaxation(std::int64_t floor) {
    best_ = floor;
    start_ = Clock::now();
    const int root = first_violation(static_cast<int>(facts_.size()), true);
    relax(0, root);
  }

  void run_maximize() {
    best_ = -1;
    start_ = Clock::now();
    std::vector<char> violated(facts_.size(), 0);
    std::int64_t lost = 0;
    for (std::size_t i = 0; i < facts_.size(); ++i) {
      if (violated_now(facts_[i], true)) {
        violated[i] = 1;
        lost += facts_[i].weight;
      }
    }
    maximize(0, violated, lost);
  }

  bool found() const { return found_; }
  const std::vector<int>& best_assignment() const { return best_assignment_; }
  bool complete() const { return !timed_out_; }
  std::size_t nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }

 private:
  using Clock = std::chrono::steady_clock;

  void reset_graph() {
    std::fill(std::begin(par_), std::end(par_), 0);
    std::fill(std::begin(chi_), std::end(chi_), 0);
    std::fill(std::begin(und_), std::end(und_), 0);
    for (auto [u, v] : edges_) {
      und_[u] |= bit(v);
      und_[v] |= bit(u);
    }
    assignment_.assign(edges_.size(), kAbsent);
  }

  bool reaches(Node from, Node to) const {
    Mask seen = bit(from);
    Mask frontier = seen;
    while (frontier) {
      Mask next = 0;
      for (Mask f = frontier; f; f &= f - 1) next |= chi_[std::countr_zero(f)];
      if (next & bit(to)) return true;
      next &= ~seen;
      seen |= next;
      frontier = next;
    }
    return false;
  }

  bool allowed(std::size_t depth, int value) const {
    if (!(domain_[depth] & (1u << value))) return false;
    if (value == kAbsent) return true;
    auto [u, v] = edges_[depth];
    if (value == kBackward) std::swap(u, v);
    return !reaches(v, u);
  }

  void apply(std::size_t depth, int value) {
    auto [u, v] = edges_[depth];
    und_[u] &= ~bit(v);
    und_[v] &= ~bit(u);
    if (value == kBackward) std::swap(u, v);
    if (value != kAbsent) {
      chi_[u] |= bit(v);
      par_[v] |= bit(u);
    }
    assignment_[depth] = value;
  }

  void undo(std::size_t depth, int value) {
    auto [u, v] = edges_[depth];
    und_[u] |= bit(v);
    und_[v] |= bit(u);
    if (value == kBackward) std::swap(u, v);
    if (value != kAbsent) {
      chi_[u] &= ~bit(v);
      par_[v] &= ~bit(u);
    }
    assignment_[depth] = kAbsent;
  }

  // A fact is definitely violated when no completion of the current partial
  // assignment can satisfy it. Present edges only ever open more trails, so
  // an independence already contradicted stays contradicted. For dependences
  // the undecided edges are allowed in both directions at once, which
  // over-approximates the trails of every completion.
  bool violated_now(const CompiledFact& f, bool present_changed) const {
    if (f.independent) {
      return present_changed && (active_reach(par_, chi_, f.x, f.z) & bit(f.y));
    }
    Mask wpar[64], wchi[64];
    for (int v = 0; v < n_; ++v) {
      wpar[v] = par_[v] | und_[v];
      wchi[v] = chi_[v] | und_[v];
    }
    return !(active_reach(wpar, wchi, f.x, f.z) & bit(f.y));
  }

  int first_violation(int limit, bool present_changed) const {
    for (int i = 0; i < limit; ++i) {
      if (violated_now(facts_[i], present_changed)) return i;
    }
    return limit;
  }

  bool out_of_time() {
    if (++nodes_ % 1024 == 0 && budget_ >= 0.0) {
      std::chrono::duration<double> elapsed = Clock::now() - start_;
      if (elapsed.count() > budget_) timed_out_ = true;
    }
    return timed_out_;
  }

  // `bound` is the index of the first fact no completion can satisfy.
  void relax(std::size_t depth, int bound) {
    if (stop_ || bound <= best_) return;
    if (out_of_time()) {
      stop_ = true;
      return;
    }
    if (depth == edges_.size()) {
      best_ = bound;
      best_assignment_ = assignment_;
      found_ = true;
      if (bound == static_cast<int>(facts_.size())) stop_ = true;
      return;
    }
    for (int value : {kAbsent, kForward, kBackward}) {
      if (!allowed(depth, value)) continue;
      apply(depth, value);
      int child = first_violation(bound, value != kAbsent);
      if (child > best_) relax(depth + 1, child);
      undo(depth, value);
      if (stop_) return;
    }
  }

  void maximize(std::size_t depth, const std::vector<char>& violated, std::int64_t lost) {
    const std::int64_t bound = total_weight_ - lost;
    if (stop_ || bound <= best_) return;
    if (out_of_time()) {
      stop_ = true;
      return;
    }
    if (depth == edges_.size()) {
      best_ = bound;
      best_assignment_ = assignment_;
      found_ = true;
      if (bound == total_weight_) stop_ = true;
      return;
    }
    std::vector<char> child(violated.size());
    for (int value : {kAbsent, kForward, kBackward}) {
      if (!allowed(depth, value)) continue;
      apply(depth, value);
      child = violated;
      std::int64_t child_lost = lost;
      for (std::size_t i = 0; i < facts_.size(); ++i) {
        if (!child[i] && violated_now(facts_[i], value != kAbsent)) {
          child[i] = 1;
          child_lost += facts_[i].weight;
        }
      }
      maximize(depth + 1, child, child_lost);
      undo(depth, value);
      if (stop_) return;
    }
  }

  int n_;
  std::vector<Edge> edges_;
  std::vector<std::uint8_t> domain_;
  std::vector<CompiledFact> facts_;
  std::int64_t total_weight_ = 0;
  Mask par_[64];
  Mask chi_[64];
  Mask und_[64];
  std::vector<int> assignment_;

  std::int64_t best_ = -1;
  std::vector<int> best_assignment_;
  bool found_ = false;
  bool stop_ = false;
  bool timed_out_ = false;
  std::size_t nodes_ = 0;
  double budget_;
  Clock::time_point start_;
};

Dag dag_from_assignment(int n, const std::vector<Edge>& edges, const std::vector<int>& assignment) {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (assignment[i] == kForward) out.push_back(edges[i]);
    if (assignment[i] == kBackward) out.emplace_back(edges[i].second, edges[i].first);
  }
  return Dag(n, std::move(out));
}

bool fact_holds(const Dag& g, const CiStatement& f) { return d_separated(g, f.x, f.y, f.z) == f.independent; }

}  // namespace

bool check_correspondence(const Dag& dag, const std::vector<CiStatement>& accepted) {
  return std::all_of(accepted.begin(), accepted.end(), [&](const CiStatement& f) { return fact_holds(dag, f); });
}

void validate_solution(const SolverInput& in, const Solution& s) {
  auto candidates = sorted_unique(in.candidate_edges);
  for (const auto& e : s.dag.edges()) {
    if (!contains(candidates, unordered(e))) throw SolverError("solution uses a non-candidate edge");
  }
  for (const auto& e : in.required) {
    if (!s.dag.has_edge(e.first, e.second)) throw SolverError("solution misses a required arrow");
  }
  for (const auto& e : in.forbidden) {
    if (s.dag.has_edge(e.first, e.second)) throw SolverError("solution contains a forbidden arrow");
  }
  if (!check_correspondence(s.dag, s.accepted)) {
    throw SolverError("solution DAG contradicts an accepted fact");
  }
}

Solution solve(const SolverInput& input) {
  validate_input(input);
  const auto started = std::chrono::steady_clock::now();
  std::vector<CiStatement> facts = input.facts;
  sort_facts(facts);
  const int total = static_cast<int>(facts.size());

  std::vector<Edge> required_only(input.required.begin(), input.required.end());
  if (!is_acyclic(input.n, required_only)) {
    throw SolverError("required arrows form a directed cycle; no DAG can satisfy them");
  }

  Search search(input, facts);
  const auto& cfg = input.config;
  if (cfg.mode == SolverMode::relaxation) {
    std::int64_t floor = cfg.max_demotions >= 0 ? std::max(-1, total - cfg.max_demotions - 1) : -1;
    search.run_relaxation(floor);
  } else {
    search.run_maximize();
  }

  Solution sol;
  sol.mode = cfg.mode;
  sol.complete = search.complete();
  sol.nodes_explored = search.nodes();
  sol.dropped_required = input.dropped_required;
  if (search.found()) {
    sol.dag = dag_from_assignment(input.n, search.edges(), search.best_assignment());
  } else if (!sol.complete) {
    // Budget ran out before any complete assignment: fall back to the required arrows alone.
    sol.dag = Dag(input.n, required_only);
  } else {
    throw SolverError("no DAG satisfies the constraints within the demotion limit");
  }

  std::vector<char> holds(facts.size());
  for (std::size_t i = 0; i < facts.size(); ++i) holds[i] = fact_holds(sol.dag, facts[i]);
  std::vector<char> accept(facts.size(), 0);
  if (cfg.mode == SolverMode::relaxation) {
    std::size_t prefix = 0;
    while (prefix < facts.size() && holds[prefix]) ++prefix;
    for (std::size_t i = 0; i < prefix; ++i) accept[i] = 1;
  } else {
    accept.assign(holds.begin(), holds.end());
  }

  for (std::size_t i = 0; i < facts.size(); ++i) {
    TraceEntry t;
    t.key = facts[i].key();
    t.independent = facts[i].independent;
    t.credibility = facts[i].credibility;
    t.holds = holds[i];
    if (accept[i]) {
      t.status = FactStatus::accepted;
      t.reason = "consistent with the output DAG";
      sol.accepted.push_back(facts[i]);
      sol.optimum_weight += facts[i].credibility;
    } else {
      t.status = FactStatus::demoted;
      if (cfg.mode == SolverMode::relaxation) {
        t.reason = "demoted at relaxation step " + std::to_string(total - static_cast<int>(i)) +
                   (holds[i] ? "; still holds in the output DAG" : "; contradicted by the output DAG");
      } else {
        t.reason = "left unsatisfied by the weight-maximal DAG";
      }
      sol.demoted.push_back(facts[i]);
    }
    sol.trace.push_back(std::move(t));
  }
  std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
  sol.wall_seconds = elapsed.count();
  validate_solution(input, sol);
  return sol;
}

std::vector<Dag> enumerate_consistent_dags(const SolverInput& input, std::size_t cap) {
  if (input.n > 6) throw SolverError("enumerate_consistent_dags is limited to n <= 6");
  validate_input(input);
  const auto edges = sorted_unique(input.candidate_edges);
  const auto required = sorted_unique(input.required);
  const auto forbidden = sorted_unique(input.forbidden);
  std::vector<Dag> out;
  std::vector<Edge> chosen;
  auto recurse = [&](auto&& self, std::size_t depth) -> void {
    if (out.size() >= cap) return;
    if (depth == edges.size()) {
      if (!is_acyclic(input.n, chosen)) return;
      Dag g(input.n, chosen);
      if (check_correspondence(g, input.facts)) out.push_back(std::move(g));
      return;
    }
    auto [u, v] = edges[depth];
    const bool need_fwd = contains(required, {u, v});
    const bool need_bwd = contains(required, {v, u});
    if (!need_fwd && !need_bwd) self(self, depth + 1);
    if (!need_bwd && !contains(forbidden, {u, v})) {
      chosen.emplace_back(u, v);
      self(self, depth + 1);
      chosen.pop_back();
    }
    if (!need_fwd && !contains(forbidden, {v, u})) {
      chosen.emplace_back(v, u);
      self(self, depth + 1);
      chosen.pop_back();
    }
  };
  recurse(recurse, 0);
  return out;
}

namespace {

std::string node_name(const std::vector<std::string>& names, Node v) {
  return v < static_cast<Node>(names.size()) ? names[v] : "X" + std::to_string(v);
}

nlohmann::json key_json(const FactKey& k, bool independent) {
  return {{"x", k.x}, {"y", k.y}, {"z", k.z}, {"independent", independent}};
}

std::string statement_text(const FactKey& k, bool independent, const std::vector<std::string>& names) {
  std::string s = node_name(names, k.x) + (independent ? " _||_ " : " not _||_ ") + node_name(names, k.y);
  if (!k.z.empty()) {
    s += " | ";
    for (std::size_t i = 0; i < k.z.size(); ++i) s += (i ? ", " : "") + node_name(names, k.z[i]);
  }
  return s;
}

}  // namespace

nlohmann::json solution_to_json(const Solution& s, const std::vector<std::string>& names) {
  nlohmann::json j;
  j["mode"] = to_string(s.mode);
  j["complete"] = s.complete;
  j["wall_time_s"] = s.wall_seconds;
  j["nodes_explored"] = s.nodes_explored;
  j["optimum_weight"] = s.optimum_weight;
  j["dag"] = graph_to_json(s.dag);
  if (!names.empty()) {
    auto named = nlohmann::json::array();
    for (auto [u, v] : s.dag.edges()) named.push_back({node_name(names, u), node_name(names, v)});
    j["edges_named"] = named;
    j["variables"] = names;
  }
  j["accepted"] = nlohmann::json::array();
  for (const auto& f : s.accepted) j["accepted"].push_back(key_json(f.key(), f.independent));
  j["demoted"] = nlohmann::json::array();
  for (const auto& f : s.demoted) j["demoted"].push_back(key_json(f.key(), f.independent));
  j["dropped_required"] = nlohmann::json::array();
  for (auto [u, v] : s.dropped_required) j["dropped_required"].push_back({u, v});
  j["trace"] = nlohmann::json::array();
  for (const auto& t : s.trace) {
    auto e = key_json(t.key, t.independent);
    e["credibility"] = t.credibility;
    e["status"] = t.status == FactStatus::accepted ? "accepted" : "demoted";
    e["holds"] = t.holds;
    e["reason"] = t.reason;
    j["trace"].push_back(std::move(e));
  }
  return j;
}

std::string render_trace(const Solution& s, const std::vector<std::string>& names) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << "mode: " << to_string(s.mode) << (s.complete ? " (complete" : " (INCOMPLETE: time budget exhausted")
      << ", " << s.wall_seconds << " s, " << s.nodes_explored << " search nodes)\n";
  out << "output DAG (" << s.dag.num_edges() << " edges):\n";
  for (auto [u, v] : s.dag.edges()) out << "  " << node_name(names, u) << " -> " << node_name(names, v) << '\n';
  out << "facts: " << s.accepted.size() << " accepted, " << s.demoted.size()
      << " demoted; accepted weight " << s.optimum_weight << '\n';
  for (const auto& t : s.trace) {
    out << "  [" << (t.status == FactStatus::accepted ? "accepted" : "demoted ") << "] "
        << statement_text(t.key, t.independent, names) << "  (credibility " << t.credibility << ") "
        << t.reason << '\n';
  }
  if (!s.dropped_required.empty()) {
    out << "required arrows dropped before solving:\n";
    for (auto [u, v] : s.dropped_required) out << "  " << node_name(names, u) << " -> " << node_name(names, v) << '\n';
  }
  return out.str();
}

}  // namespace argcd

// SPDX-License-Identifier: Apache-2.0
//
// Stable-extension DAG search. A CI fact ledger is combined with required and
// forbidden arrows; the solver returns a DAG whose d-separation relations
// agree with every accepted fact, demoting the least credible facts when the
// full set admits no such DAG.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "argcd/ci.hpp"
#include "argcd/graph.hpp"

namespace argcd {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SolverMode { relaxation, maximize };

const char* to_string(SolverMode mode);
SolverMode solver_mode_from(const std::string& name);

struct SolverConfig {
  SolverMode mode = SolverMode::relaxation;
  double time_budget_s = 300.0;
  /// Relaxation refuses solutions that demote more facts than this (< 0: no limit).
  int max_demotions = -1;
};

/// Unordered pairs (u < v) split into those the solver may use and those
/// removed for good.
struct Reduction {
  std::vector<Edge> candidates;
  std::vector<Edge> removed;
};

/// A pair is removed iff some independent fact on it has credibility >= tau_hard.
Reduction reduce_skeleton(const std::vector<CiStatement>& facts, int n, double tau_hard);

/// Removes every pair that is not adjacent in `skeleton`.
Reduction reduce_to_skeleton(const Pdag& skeleton);

struct SemanticConstraints {
  std::vector<Edge> required;
  std::vector<Edge> forbidden;
  /// Required arrows discarded because their pair was removed or they could not be honoured.
  std::vector<Edge> dropped_required;
  /// Forbidden arrows over removed pairs; kept, but they constrain nothing.
  std::vector<Edge> vacuous_forbidden;
  std::vector<std::string> warnings;
};

SemanticConstraints apply_semantic_constraints(const Reduction& reduction, const std::vector<Edge>& required,
                                               const std::vector<Edge>& forbidden);

/// Credibility descending, ties by canonical key, independent before dependent.
void sort_facts(std::vector<CiStatement>& facts);

struct SolverInput {
  int n = 0;
  std::vector<Edge> candidate_edges;
  std::vector<Edge> removed_edges;
  std::vector<CiStatement> facts;
  std::vector<Edge> required;
  std::vector<Edge> forbidden;
  /// Carried through to the Solution for reporting.
  std::vector<Edge> dropped_required;
  SolverConfig config;
};

SolverInput make_solver_input(int n, std::vector<CiStatement> facts, const Reduction& reduction,
                              const SemanticConstraints& constraints, SolverConfig config = {});

/// Throws SolverError when an input invariant is violated.
void validate_input(const SolverInput& input);

enum class FactStatus { accepted, demoted };

struct TraceEntry {
  FactKey key;
  bool independent = false;
  double credibility = 0.0;
  FactStatus status = FactStatus::accepted;
  /// Whether the statement is true of the output DAG.
  bool holds = true;
  std::string reason;
};

struct Solution {
  Dag dag;
  std::vector<CiStatement> accepted;
  std::vector<CiStatement> demoted;
  std::vector<Edge> dropped_required;
  std::vector<TraceEntry> trace;
  double optimum_weight = 0.0;
  /// False when the time budget ran out before the search finished.
  bool complete = true;
  double wall_seconds = 0.0;
  SolverMode mode = SolverMode::relaxation;
  std::size_t nodes_explored = 0;
};

/// Deterministic: edges are decided in lexicographic order, trying
/// absent, then forward (u -> v), then backward.
Solution solve(const SolverInput& input);

/// Every accepted independent fact is d-separated and every accepted
/// dependent fact is d-connected in `dag`.
bool check_correspondence(const Dag& dag, const std::vector<CiStatement>& accepted);

/// Checks the Solution invariants against its input; throws SolverError on failure.
void validate_solution(const SolverInput& input, const Solution& solution);

/// All DAGs over the candidate edges that satisfy every fact and constraint,
/// in the solver's search order, stopping at `cap`. Requires n <= 6.
std::vector<Dag> enumerate_consistent_dags(const SolverInput& input, std::size_t cap);

nlohmann::json solution_to_json(const Solution& s, const std::vector<std::string>& names = {});
std::string render_trace(const Solution& s, const std::vector<std::string>& names = {});

}  // namespace argcd

// SPDX-License-Identifier: Apache-2.0
//
// Order-independent PC skeleton search with separating-set bookkeeping,
// majority-rule collider orientation, and the fact ledger consumed by the
// solver.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <vector>

#include <json.hpp>

#include "argcd/ci.hpp"
#include "argcd/graph.hpp"

namespace argcd {

struct SkeletonResult {
  Pdag skeleton;
  /// Every executed test, deduplicated by key, in execution order.
  std::vector<CiStatement> facts;
  /// (x, y) with x < y -> separating sets that produced an independent verdict.
  std::map<Edge, std::vector<NodeSet>> sepsets;
};

/// `max_cond_size` < 0 means n - 2. At each level every subset of the
/// snapshot adjacency of either endpoint is tested; removals take effect at
/// the next level, so the outcome does not depend on variable order.
SkeletonResult learn_skeleton(const CiTester& tester, int max_cond_size = -1);

struct OrientResult {
  Pdag pdag;
  /// Triples whose middle node sits in exactly half of the separating sets.
  std::vector<Triple> ambiguous;
  /// Skeleton edges that received arrowheads from both sides.
  std::vector<Edge> conflicts;
};

/// Majority-rule collider orientation. Tests it runs are appended to `s.facts`.
OrientResult orient_majority(SkeletonResult& s, const CiTester& tester, int max_cond_size = -1);

struct MpcResult {
  SkeletonResult skeleton;
  OrientResult oriented;
  Pdag cpdag;
  std::vector<Edge> meek_conflicts;
};

MpcResult mpc_cpdag(const CiTester& tester, int max_cond_size = -1);

nlohmann::json fact_to_json(const CiStatement& s, double alpha);
CiStatement fact_from_json(const nlohmann::json& j);

/// One JSON object per line.
void write_fact_ledger(std::ostream& out, const std::vector<CiStatement>& facts, double alpha);
void write_fact_ledger(const std::filesystem::path& path, const std::vector<CiStatement>& facts, double alpha);
std::vector<CiStatement> read_fact_ledger(const std::filesystem::path& path);

}  // namespace argcd

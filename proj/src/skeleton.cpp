// SPDX-License-Identifier: Apache-2.0

#include "argcd/skeleton.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace argcd {

namespace {

/// Calls `visit` on every size-k subset of `items` in lexicographic order.
template <typename Visit>
void for_each_subset(const std::vector<Node>& items, int k, Visit&& visit) {
  const int m = static_cast<int>(items.size());
  if (k > m) return;
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  NodeSet subset(k);
  while (true) {
    for (int i = 0; i < k; ++i) subset[i] = items[idx[i]];
    visit(subset);
    int i = k - 1;
    while (i >= 0 && idx[i] == m - k + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

class FactBook {
 public:
  FactBook(const CiTester& tester, std::vector<CiStatement>& facts) : tester_(tester), facts_(facts) {
    for (std::size_t i = 0; i < facts_.size(); ++i) index_.emplace(facts_[i].key(), i);
  }

  const CiStatement& run(Node x, Node y, const NodeSet& z, TestStage stage) {
    FactKey key{std::min(x, y), std::max(x, y), z};
    if (auto it = index_.find(key); it != index_.end()) return facts_[it->second];
    CiStatement s;
    try {
      s = tester_.test(key.x, key.y, key.z);
    } catch (const CiError&) {
      // Failed tests count as dependent evidence with no weight.
      s.x = key.x;
      s.y = key.y;
      s.z = key.z;
      s.independent = false;
      s.p_value = 0.0;
      s.reliable = false;
      s.credibility = 0.0;
    }
    s.stage = stage;
    facts_.push_back(std::move(s));
    index_.emplace(std::move(key), facts_.size() - 1);
    return facts_.back();
  }

 private:
  const CiTester& tester_;
  std::vector<CiStatement>& facts_;
  std::map<FactKey, std::size_t> index_;
};

std::vector<Node> neighbours_except(const std::vector<std::vector<char>>& adj, Node v, Node skip) {
  std::vector<Node> out;
  for (Node u = 0; u < static_cast<Node>(adj.size()); ++u) {
    if (u != skip && adj[v][u]) out.push_back(u);
  }
  return out;
}

}  // namespace

SkeletonResult learn_skeleton(const CiTester& tester, int max_cond_size) {
  const int n = tester.num_vars();
  if (max_cond_size < 0) max_cond_size = std::max(0, n - 2);
  SkeletonResult result;
  FactBook book(tester, result.facts);
  std::vector<std::vector<char>> adj(n, std::vector<char>(n, 1));
  for (Node v = 0; v < n; ++v) adj[v][v] = 0;

  for (int level = 0; level <= max_cond_size; ++level) {
    const auto snapshot = adj;
    bool any_pair_testable = false;
    std::vector<Edge> removals;
    for (Node x = 0; x < n; ++x) {
      for (Node y = x + 1; y < n; ++y) {
        if (!snapshot[x][y]) continue;
        bool separated = false;
        for (auto [a, b] : {Edge{x, y}, Edge{y, x}}) {
          auto candidates = neighbours_except(snapshot, a, b);
          if (static_cast<int>(candidates.size()) < level) continue;
          any_pair_testable = true;
          for_each_subset(candidates, level, [&](const NodeSet& s) {
            const auto& fact = book.run(x, y, s, level == 0 ? TestStage::sweep : TestStage::skeleton);
            if (fact.independent) {
              separated = true;
              auto& sets = result.sepsets[{x, y}];
              if (std::find(sets.begin(), sets.end(), s) == sets.end()) sets.push_back(s);
            }
          });
        }
        if (separated) removals.emplace_back(x, y);
      }
    }
    for (auto [x, y] : removals) adj[x][y] = adj[y][x] = 0;
    if (!any_pair_testable) break;
  }

  std::vector<Edge> undirected;
  for (Node x = 0; x < n; ++x) {
    for (Node y = x + 1; y < n; ++y) {
      if (adj[x][y]) undirected.emplace_back(x, y);
    }
  }
  result.skeleton = Pdag(n, {}, std::move(undirected));
  return result;
}

OrientResult orient_majority(SkeletonResult& s, const CiTester& tester, int max_cond_size) {
  const int n = s.skeleton.size();
  if (max_cond_size < 0) max_cond_size = std::max(0, n - 2);
  FactBook book(tester, s.facts);
  std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
  for (auto [u, v] : s.skeleton.undirected()) adj[u][v] = adj[v][u] = 1;

  OrientResult out;
  std::set<Edge> arrowheads;  // (tail, head)
  for (Node x = 0; x < n; ++x) {
    for (Node y = x + 1; y < n; ++y) {
      if (adj[x][y]) continue;
      std::vector<Node> middles;
      for (Node z = 0; z < n; ++z) {
        if (adj[x][z] && adj[y][z]) middles.push_back(z);
      }
      if (middles.empty()) continue;

      std::set<NodeSet> candidate_sets;
      for (auto [a, b] : {Edge{x, y}, Edge{y, x}}) {
        auto nb = neighbours_except(adj, a, b);
        const int top = std::min<int>(max_cond_size, static_cast<int>(nb.size()));
        for (int k = 0; k <= top; ++k) {
          for_each_subset(nb, k, [&](const NodeSet& sub) { candidate_sets.insert(sub); });
        }
      }
      std::vector<NodeSet> separating;
      for (const auto& sub : candidate_sets) {
        if (book.run(x, y, sub, TestStage::majority).independent) separating.push_back(sub);
      }
      for (Node z : middles) {
        std::size_t with_z = 0;
        for (const auto& sub : separating) {
          if (std::binary_search(sub.begin(), sub.end(), z)) ++with_z;
        }
        if (2 * with_z < separating.size()) {
          arrowheads.insert({x, z});
          arrowheads.insert({y, z});
        } else if (2 * with_z == separating.size()) {
          out.ambiguous.push_back({x, z, y});
        }
      }
    }
  }

  std::vector<Edge> directed, undirected;
  for (auto [u, v] : s.skeleton.undirected()) {
    bool uv = arrowheads.count({u, v}) > 0;
    bool vu = arrowheads.count({v, u}) > 0;
    if (uv && vu) {
      out.conflicts.emplace_back(u, v);
      undirected.emplace_back(u, v);
    } else if (uv) {
      directed.emplace_back(u, v);
    } else if (vu) {
      directed.emplace_back(v, u);
    } else {
      undirected.emplace_back(u, v);
    }
  }
  out.pdag = Pdag(n, std::move(directed), std::move(undirected));
  return out;
}

MpcResult mpc_cpdag(const CiTester& tester, int max_cond_size) {
  MpcResult r;
  r.skeleton = learn_skeleton(tester, max_cond_size);
  r.oriented = orient_majority(r.skeleton, tester, max_cond_size);
  r.cpdag = meek_closure(r.oriented.pdag, &r.meek_conflicts, r.oriented.ambiguous);
  return r;
}

namespace {

const char* stage_name(TestStage stage) {
  switch (stage) {
    case TestStage::sweep: return "sweep";
    case TestStage::skeleton: return "skeleton";
    case TestStage::majority: return "majority";
    case TestStage::unspecified: break;
  }
  return "unspecified";
}

TestStage stage_from(const std::string& name) {
  if (name == "sweep") return TestStage::sweep;
  if (name == "skeleton") return TestStage::skeleton;
  if (name == "majority") return TestStage::majority;
  return TestStage::unspecified;
}

}  // namespace

nlohmann::json fact_to_json(const CiStatement& s, double alpha) {
  return {{"x", s.x},
          {"y", s.y},
          {"z", s.z},
          {"independent", s.independent},
          {"g2", s.g2},
          {"dof", s.dof},
          {"p_value", s.p_value},
          {"credibility", s.credibility},
          {"reliable", s.reliable},
          {"stage", stage_name(s.stage)},
          {"alpha", alpha}};
}

CiStatement fact_from_json(const nlohmann::json& j) {
  CiStatement s;
  s.x = j.at("x").get<Node>();
  s.y = j.at("y").get<Node>();
  s.z = j.at("z").get<NodeSet>();
  s.independent = j.at("independent").get<bool>();
  s.g2 = j.value("g2", 0.0);
  s.dof = j.value("dof", std::int64_t{1});
  s.p_value = j.at("p_value").get<double>();
  s.credibility = j.at("credibility").get<double>();
  s.reliable = j.value("reliable", true);
  s.stage = stage_from(j.value("stage", std::string{}));
  canonicalize(s);
  return s;
}

void write_fact_ledger(std::ostream& out, const std::vector<CiStatement>& facts, double alpha) {
  for (const auto& s : facts) out << fact_to_json(s, alpha).dump() << '\n';
}

void write_fact_ledger(const std::filesystem::path& path, const std::vector<CiStatement>& facts, double alpha) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write fact ledger " + path.string());
  write_fact_ledger(out, facts, alpha);
}

std::vector<CiStatement> read_fact_ledger(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open fact ledger " + path.string());
  std::vector<CiStatement> facts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      facts.push_back(fact_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return facts;
}

}  // namespace argcd

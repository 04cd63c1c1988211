// SPDX-License-Identifier: Apache-2.0

#include "argcd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace argcd {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below requires n > 0");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return r % n;
}

double Rng::normal() {
  const double u1 = uniform_open0();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<double> Rng::flat_dirichlet(int k) {
  std::vector<double> w(k);
  double total = 0.0;
  for (auto& x : w) {
    x = -std::log(uniform_open0());
    total += x;
  }
  for (auto& x : w) x /= total;
  return w;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

const char* to_string(DagKind kind) {
  switch (kind) {
    case DagKind::erdos_renyi:
      return "erdos_renyi";
    case DagKind::scale_free:
      return "scale_free";
    case DagKind::lower_triangular:
      return "lower_triangular";
  }
  return "?";
}

DagKind dag_kind_from(const std::string& name) {
  if (name == "erdos_renyi" || name == "er") return DagKind::erdos_renyi;
  if (name == "scale_free" || name == "sf") return DagKind::scale_free;
  if (name == "lower_triangular" || name == "lt") return DagKind::lower_triangular;
  throw std::invalid_argument("unknown DAG kind '" + name + "'");
}

namespace {

std::vector<Node> permutation(int n, Rng& rng) {
  std::vector<Node> p(n);
  std::iota(p.begin(), p.end(), 0);
  rng.shuffle(p);
  return p;
}

// Barabasi-Albert growth over positions 0..n-1; edges run from the earlier
// position to the newcomer.
std::vector<Edge> preferential_attachment(int n, double density, Rng& rng) {
  const int m = std::max(1, static_cast<int>(std::lround(density * n / 2.0)));
  std::vector<int> degree(n, 0);
  std::vector<Edge> edges;
  for (int t = 1; t < n; ++t) {
    std::vector<char> chosen(t, 0);
    for (int k = 0; k < std::min(m, t); ++k) {
      double total = 0.0;
      for (int v = 0; v < t; ++v) {
        if (!chosen[v]) total += degree[v] + 1.0;
      }
      double r = rng.uniform() * total;
      int pick = -1;
      for (int v = 0; v < t; ++v) {
        if (chosen[v]) continue;
        pick = v;
        r -= degree[v] + 1.0;
        if (r < 0) break;
      }
      chosen[pick] = 1;
      edges.emplace_back(pick, t);
      ++degree[pick];
      ++degree[t];
    }
  }
  return edges;
}

}  // namespace

Dag random_dag(DagKind kind, int n, double density, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("random_dag needs at least two nodes");
  if (!(density > 0.0 && density <= 1.0)) throw std::invalid_argument("density must lie in (0, 1]");
  Rng rng(seed);
  const auto label = permutation(n, rng);
  std::vector<Edge> edges;
  switch (kind) {
    case DagKind::erdos_renyi: {
      const auto rank = permutation(n, rng);
      for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v) {
          if (rng.uniform() < density) edges.push_back(rank[u] < rank[v] ? Edge{u, v} : Edge{v, u});
        }
      }
      break;
    }
    case DagKind::scale_free:
      edges = preferential_attachment(n, density, rng);
      break;
    case DagKind::lower_triangular:
      for (int i = 1; i < n; ++i) {
        for (int j = 0; j < i; ++j) {
          if (rng.uniform() < density) edges.emplace_back(j, i);
        }
      }
      break;
  }
  for (auto& [u, v] : edges) {
    u = label[u];
    v = label[v];
  }
  return Dag(n, std::move(edges));
}

std::vector<int> random_cardinalities(int n, int lo, int hi, std::uint64_t seed) {
  if (lo < 2 || hi < lo) throw std::invalid_argument("cardinality range must satisfy 2 <= lo <= hi");
  Rng rng(seed);
  std::vector<int> out(n);
  for (auto& c : out) c = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
  return out;
}

std::size_t cpt_row(const Cpt& cpt, const std::vector<int>& cardinalities, const std::vector<int>& assignment) {
  std::size_t row = 0, stride = 1;
  for (Node p : cpt.parents) {
    row += stride * static_cast<std::size_t>(assignment[p]);
    stride *= static_cast<std::size_t>(cardinalities[p]);
  }
  return row;
}

BayesNet sample_bn(const Dag& dag, const std::vector<int>& cardinalities, std::uint64_t seed) {
  if (static_cast<int>(cardinalities.size()) != dag.size()) {
    throw std::invalid_argument("one cardinality per node is required");
  }
  for (int c : cardinalities) {
    if (c < 2) throw std::invalid_argument("cardinalities must be at least 2");
  }
  Rng rng(seed);
  BayesNet bn{dag, cardinalities, {}};
  for (Node v = 0; v < dag.size(); ++v) {
    Cpt cpt;
    cpt.node = v;
    cpt.parents = make_node_set(dag.parents(v));
    std::size_t configs = 1;
    for (Node p : cpt.parents) configs *= static_cast<std::size_t>(cardinalities[p]);
    for (std::size_t r = 0; r < configs; ++r) cpt.rows.push_back(rng.flat_dirichlet(cardinalities[v]));
    bn.cpts.push_back(std::move(cpt));
  }
  return bn;
}

void validate_bn(const BayesNet& bn, double tolerance) {
  const int n = bn.dag.size();
  if (static_cast<int>(bn.cardinalities.size()) != n || static_cast<int>(bn.cpts.size()) != n) {
    throw std::invalid_argument("network needs one cardinality and one table per node");
  }
  for (Node v = 0; v < n; ++v) {
    const auto& cpt = bn.cpts[v];
    if (cpt.node != v || cpt.parents != make_node_set(bn.dag.parents(v))) {
      throw std::invalid_argument("table " + std::to_string(v) + " does not match the graph");
    }
    std::size_t configs = 1;
    for (Node p : cpt.parents) configs *= static_cast<std::size_t>(bn.cardinalities[p]);
    if (cpt.rows.size() != configs) throw std::invalid_argument("table " + std::to_string(v) + " has wrong row count");
    for (const auto& row : cpt.rows) {
      if (static_cast<int>(row.size()) != bn.cardinalities[v]) {
        throw std::invalid_argument("table " + std::to_string(v) + " has wrong row width");
      }
      double sum = 0.0;
      for (double p : row) {
        if (!(p >= 0.0)) throw std::invalid_argument("negative probability in table " + std::to_string(v));
        sum += p;
      }
      if (std::abs(sum - 1.0) > tolerance) {
        throw std::invalid_argument("row of table " + std::to_string(v) + " does not sum to 1");
      }
    }
  }
}

Dataset forward_sample(const BayesNet& bn, std::size_t rows, std::uint64_t seed, std::vector<VariableMeta> variables) {
  validate_bn(bn, 1e-6);
  const int n = bn.dag.size();
  if (variables.empty()) {
    for (int v = 0; v < n; ++v) variables.push_back({"X" + std::to_string(v), ""});
  }
  Rng rng(seed);
  const auto order = bn.dag.topological_order();
  std::vector<std::vector<int>> columns(n, std::vector<int>(rows));
  std::vector<int> assignment(n);
  for (std::size_t r = 0; r < rows; ++r) {
    for (Node v : order) {
      const auto& probs = bn.cpts[v].rows[cpt_row(bn.cpts[v], bn.cardinalities, assignment)];
      double u = rng.uniform();
      int level = static_cast<int>(probs.size()) - 1;
      for (int k = 0; k < static_cast<int>(probs.size()); ++k) {
        u -= probs[k];
        if (u < 0) {
          level = k;
          break;
        }
      }
      // Never land on a zero-probability level through rounding at the top end.
      while (level > 0 && probs[level] == 0.0) --level;
      assignment[v] = level;
      columns[v][r] = level;
    }
  }
  return Dataset(std::move(variables), bn.cardinalities, std::move(columns), rows);
}

nlohmann::json cpts_to_json(const BayesNet& bn) {
  auto out = nlohmann::json::array();
  for (const auto& cpt : bn.cpts) {
    out.push_back({{"node", cpt.node}, {"parents", cpt.parents}, {"rows", cpt.rows}});
  }
  return out;
}

BayesNet bn_from_json(const Dag& dag, const std::vector<int>& cardinalities, const nlohmann::json& cpts) {
  BayesNet bn{dag, cardinalities, {}};
  for (const auto& j : cpts) {
    Cpt cpt;
    cpt.node = j.at("node").get<Node>();
    cpt.parents = j.at("parents").get<std::vector<Node>>();
    cpt.rows = j.at("rows").get<std::vector<std::vector<double>>>();
    bn.cpts.push_back(std::move(cpt));
  }
  std::sort(bn.cpts.begin(), bn.cpts.end(), [](const Cpt& a, const Cpt& b) { return a.node < b.node; });
  validate_bn(bn, 1e-6);
  return bn;
}

}  // namespace argcd

// SPDX-License-Identifier: Apache-2.0

#include "argcd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "argcd/special_functions.hpp"
#include "argcd/synth.hpp"

namespace argcd {

namespace {

void require_same_size(int a, int b) {
  if (a != b) throw MetricsError("graphs have different node counts");
}

// 0: no edge, 1: u -> v, 2: v -> u, 3: undirected; for u < v.
int pair_state(const Pdag& g, Node u, Node v) {
  if (g.has_directed(u, v)) return 1;
  if (g.has_directed(v, u)) return 2;
  if (g.has_undirected(u, v)) return 3;
  return 0;
}

int pair_state(const Dag& g, Node u, Node v) {
  if (g.has_edge(u, v)) return 1;
  if (g.has_edge(v, u)) return 2;
  return 0;
}

}  // namespace

int shd(const Pdag& est, const Dag& truth) {
  require_same_size(est.size(), truth.size());
  int cost = 0;
  for (Node u = 0; u < truth.size(); ++u) {
    for (Node v = u + 1; v < truth.size(); ++v) {
      if (pair_state(est, u, v) != pair_state(truth, u, v)) ++cost;
    }
  }
  return cost;
}

double shd_normalized(const Pdag& est, const Dag& truth) {
  const double n = truth.size();
  if (n < 2) {
    require_same_size(est.size(), truth.size());
    return 0.0;
  }
  return shd(est, truth) / (n * (n - 1) / 2.0);
}

std::int64_t sid(const Dag& est, const Dag& truth) {
  require_same_size(est.size(), truth.size());
  const int n = truth.size();
  std::vector<NodeSet> desc(n), anc(n);
  for (Node v = 0; v < n; ++v) {
    desc[v] = descendants(truth, v);
    anc[v] = ancestors(truth, v);
  }
  auto in = [](const NodeSet& s, Node v) { return std::binary_search(s.begin(), s.end(), v); };

  std::int64_t mistakes = 0;
  for (Node i = 0; i < n; ++i) {
    const NodeSet pa = make_node_set(est.parents(i));
    for (Node j = 0; j < n; ++j) {
      if (j == i) continue;
      if (in(pa, j)) {
        if (in(desc[i], j)) ++mistakes;
        continue;
      }
      // Nodes on directed paths i -> ... -> j (excluding i), and the first
      // edges of those paths.
      std::vector<Edge> keep;
      NodeSet forbidden;
      if (in(desc[i], j)) {
        for (Node w = 0; w < n; ++w) {
          if (w == i || !in(desc[i], w) || !(w == j || in(anc[j], w))) continue;
          forbidden.push_back(w);
          forbidden.insert(forbidden.end(), desc[w].begin(), desc[w].end());
        }
        forbidden = make_node_set(std::move(forbidden));
      }
      bool invalid = std::any_of(pa.begin(), pa.end(), [&](Node z) { return in(forbidden, z); });
      if (!invalid) {
        for (const auto& e : truth.edges()) {
          const bool first_causal_edge = e.first == i && (e.second == j || in(anc[j], e.second));
          if (!first_causal_edge) keep.push_back(e);
        }
        invalid = !d_separated(Dag(n, std::move(keep)), i, j, pa);
      }
      if (invalid) ++mistakes;
    }
  }
  return mistakes;
}

const char* to_string(F1Mode mode) { return mode == F1Mode::strict ? "strict" : "cpdag_aware"; }

PrecisionRecall precision_recall_f1(const Pdag& est, const Dag& truth, F1Mode mode) {
  require_same_size(est.size(), truth.size());
  const double est_edges = static_cast<double>(est.num_edges());
  const double true_edges = static_cast<double>(truth.num_edges());
  if (est_edges == 0 && true_edges == 0) return {1.0, 1.0, 1.0};
  double tp = 0.0;
  for (auto [u, v] : est.directed()) {
    if (truth.has_edge(u, v)) tp += 1.0;
  }
  if (mode == F1Mode::cpdag_aware) {
    for (auto [u, v] : est.undirected()) {
      if (truth.adjacent(u, v)) tp += 0.5;
    }
  }
  PrecisionRecall r;
  r.precision = est_edges > 0 ? tp / est_edges : 0.0;
  r.recall = true_edges > 0 ? tp / true_edges : 1.0;
  const double s = r.precision + r.recall;
  r.f1 = s > 0 ? 2.0 * r.precision * r.recall / s : 0.0;
  return r;
}

double mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double stddev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw MetricsError("welch test needs at least two samples per group");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean(a), mb = mean(b);
  const double va = std::pow(stddev(a), 2) / na;
  const double vb = std::pow(stddev(b), 2) / nb;
  WelchResult r;
  if (va + vb == 0.0) {
    r.p_value = ma == mb ? 1.0 : 0.0;
    r.t = ma == mb ? 0.0 : std::copysign(INFINITY, ma - mb);
    r.dof = na + nb - 2;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(va + vb);
  r.dof = (va + vb) * (va + vb) / (va * va / (na - 1) + vb * vb / (nb - 1));
  r.p_value = student_t_two_sided_p(r.t, r.dof);
  return r;
}

std::vector<double> benjamini_hochberg(const std::vector<double>& p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> adjusted(m);
  double running = 1.0;
  for (std::size_t k = m; k-- > 0;) {
    const std::size_t idx = order[k];
    running = std::min(running, p[idx] * (static_cast<double>(m) / static_cast<double>(k + 1)));
    adjusted[idx] = std::min(1.0, running);
  }
  return adjusted;
}

std::vector<Comparison> welch_bh(const std::map<std::string, std::vector<double>>& groups, double alpha_fdr) {
  std::vector<Comparison> out;
  for (auto a = groups.begin(); a != groups.end(); ++a) {
    for (auto b = std::next(a); b != groups.end(); ++b) {
      Comparison c;
      c.first = a->first;
      c.second = b->first;
      c.test = welch_t_test(a->second, b->second);
      out.push_back(std::move(c));
    }
  }
  std::vector<double> raw;
  for (const auto& c : out) raw.push_back(c.test.p_value);
  auto adjusted = benjamini_hochberg(raw);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].p_adjusted = adjusted[i];
    out[i].significant = adjusted[i] <= alpha_fdr;
  }
  return out;
}

Dag random_baseline(int n, double density, std::uint64_t seed) {
  if (density <= 0.0) return Dag(n);
  return random_dag(DagKind::lower_triangular, n, density, seed);
}

double edge_density(const Dag& g) {
  const double n = g.size();
  return n < 2 ? 0.0 : static_cast<double>(g.num_edges()) / (n * (n - 1) / 2.0);
}

}  // namespace argcd

// SPDX-License-Identifier: Apache-2.0
//
// Random DAG scaffolds, Dirichlet CPTs and ancestral sampling.

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "argcd/dataset.hpp"
#include "argcd/graph.hpp"

namespace argcd {

/// Seeded generator whose derived draws (uniform, normal, integers) are
/// computed here rather than by std distributions, so streams are identical
/// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform in (0, 1].
  double uniform_open0() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  /// Dirichlet(1, ..., 1) draw of length k.
  std::vector<double> flat_dirichlet(int k);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

enum class DagKind { erdos_renyi, scale_free, lower_triangular };

const char* to_string(DagKind kind);
DagKind dag_kind_from(const std::string& name);

/// Acyclic by construction. Labels are randomly permuted for every kind.
Dag random_dag(DagKind kind, int n, double density, std::uint64_t seed);

/// Uniform draws from [lo, hi].
std::vector<int> random_cardinalities(int n, int lo, int hi, std::uint64_t seed);

/// Conditional table of one node. Rows are indexed by the mixed-radix code
/// of the parent configuration (parents ascending, first parent fastest).
struct Cpt {
  Node node = 0;
  std::vector<Node> parents;
  std::vector<std::vector<double>> rows;
};

struct BayesNet {
  Dag dag;
  std::vector<int> cardinalities;
  std::vector<Cpt> cpts;
};

/// Parent-configuration row of `cpt` for the given full assignment.
std::size_t cpt_row(const Cpt& cpt, const std::vector<int>& cardinalities, const std::vector<int>& assignment);

/// Every row an independent Dirichlet(1, ..., 1) draw.
BayesNet sample_bn(const Dag& dag, const std::vector<int>& cardinalities, std::uint64_t seed);

/// Throws std::invalid_argument when a table's shape or normalisation is off.
void validate_bn(const BayesNet& bn, double tolerance = 1e-9);

/// Ancestral sampling in topological order. Variable names default to X0, X1, ...
Dataset forward_sample(const BayesNet& bn, std::size_t rows, std::uint64_t seed,
                       std::vector<VariableMeta> variables = {});

nlohmann::json cpts_to_json(const BayesNet& bn);
BayesNet bn_from_json(const Dag& dag, const std::vector<int>& cardinalities, const nlohmann::json& cpts);

}  // namespace argcd

// SPDX-License-Identifier: Apache-2.0
//
// Grounding a random DAG in a knowledge graph: score every induced match by
// semantic compactness, node specificity and structure/semantics
// correlation, keep the cheapest, and turn it into a sampled Bayesian network.

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "argcd/dataset.hpp"
#include "argcd/embedding.hpp"
#include "argcd/knowledge_graph.hpp"
#include "argcd/synth.hpp"

namespace argcd {

class UngroundableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pearson correlation of average ranks. Zero rank variance yields 0 and
/// sets `degenerate`.
double spearman_rho(const std::vector<double>& xs, const std::vector<double>& ys, bool* degenerate = nullptr);

struct CostWeights {
  double compactness = 1.0;
  double specificity = 1.0;
  double correlation = 1.0;
};

struct CandidateMatch {
  Mapping mapping;
  double compactness = 0.0;
  double specificity = 0.0;
  double correlation = 0.0;
  /// Weighted sum of the batch-normalised costs.
  double total = 0.0;
};

/// Raw cost terms of one match; `total` is left at 0.
CandidateMatch score_candidate(const Dag& pattern, const KnowledgeGraph& kg, const Mapping& mapping,
                               EmbeddingProvider& embeddings);

/// Min-max normalises each term across the batch (a constant term becomes 0)
/// and fills in `total`.
void weigh_candidates(std::vector<CandidateMatch>& batch, const CostWeights& weights);

/// Index of the lowest total; ties go to the lexicographically smallest tuple of concept names.
std::size_t best_candidate(const std::vector<CandidateMatch>& batch, const KnowledgeGraph& kg);

struct SelectOptions {
  CostWeights weights;
  std::size_t cap = 10'000;
  std::uint64_t seed = 0;
  std::size_t samples = 5000;
  int cardinality_lo = 2;
  int cardinality_hi = 4;
};

struct GroundedBenchmark {
  Dag dag;
  std::vector<VariableMeta> variables;
  BayesNet bn;
  Dataset data;
  nlohmann::json provenance;
};

GroundedBenchmark select_benchmark(const Dag& pattern, const KnowledgeGraph& kg, EmbeddingProvider& embeddings,
                                   const SelectOptions& options);

/// Files: graph.json, variables.json, cpts.json, data.csv, provenance.json.
void write_bundle(const std::filesystem::path& dir, const GroundedBenchmark& bench);
GroundedBenchmark read_bundle(const std::filesystem::path& dir);

/// FNV-1a over the bundle files in a fixed order, as 16 hex digits.
std::string bundle_checksum(const std::filesystem::path& dir);

/// Derives an independent stream seed for a named purpose.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose);

}  // namespace argcd

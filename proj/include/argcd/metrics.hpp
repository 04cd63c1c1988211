// SPDX-License-Identifier: Apache-2.0
//
// Structural (SHD, F1) and interventional (SID) distances between an
// estimated graph and the truth, plus Welch t-tests with Benjamini-Hochberg
// adjustment for comparing methods across repetitions.

#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "argcd/graph.hpp"

namespace argcd {

class MetricsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Each unordered pair that differs between the graphs costs 1: a missing
/// or extra adjacency, a reversed arrow, or an undirected estimate of a
/// directed true edge.
int shd(const Pdag& est, const Dag& truth);
inline int shd(const Dag& est, const Dag& truth) { return shd(Pdag::from_dag(est), truth); }

/// shd / (n (n - 1) / 2); 0 for graphs with fewer than two nodes.
double shd_normalized(const Pdag& est, const Dag& truth);

/// Ordered pairs (i, j) for which the estimated parents of i do not form a
/// valid adjustment set for the effect of i on j in the truth.
std::int64_t sid(const Dag& est, const Dag& truth);

enum class F1Mode { strict, cpdag_aware };

const char* to_string(F1Mode mode);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Strict: only correctly directed arrows count. Cpdag-aware: an undirected
/// estimate over a true adjacency counts half. Two empty graphs score 1.
PrecisionRecall precision_recall_f1(const Pdag& est, const Dag& truth, F1Mode mode = F1Mode::strict);

struct WelchResult {
  double t = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};

/// Two-sided Welch test with Welch-Satterthwaite degrees of freedom.
/// Both variances zero: p = 1 for equal means, 0 otherwise.
WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

/// Benjamini-Hochberg step-up adjustment; output aligned with input.
std::vector<double> benjamini_hochberg(const std::vector<double>& p_values);

struct Comparison {
  std::string first;
  std::string second;
  WelchResult test;
  double p_adjusted = 1.0;
  bool significant = false;
};

/// All unordered pairs of groups (in key order), BH-adjusted as one family.
std::vector<Comparison> welch_bh(const std::map<std::string, std::vector<double>>& groups, double alpha_fdr = 0.05);

/// Lower-triangular random DAG used as the chance-level baseline.
Dag random_baseline(int n, double density, std::uint64_t seed);

/// Edge density |E| / (n (n - 1) / 2) of a DAG.
double edge_density(const Dag& g);

double mean(const std::vector<double>& xs);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double stddev(const std::vector<double>& xs);

}  // namespace argcd

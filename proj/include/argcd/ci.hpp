// SPDX-License-Identifier: Apache-2.0
//
// Conditional-independence testing on discrete data: contingency counting,
// the G^2 likelihood-ratio statistic with chi-square p-values, and the
// credibility weight attached to each verdict.

#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>

#include "argcd/dataset.hpp"
#include "argcd/graph.hpp"

namespace argcd {

class CiError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::int64_t kDefaultCellCap = 1'000'000;

/// Counts over (x-level, y-level, z-configuration). z-configurations use a
/// mixed-radix index over z sorted ascending, with the first member varying fastest.
struct ContingencyTable {
  int rx = 0;
  int ry = 0;
  std::int64_t nz = 1;
  std::vector<std::int64_t> counts;

  std::int64_t at(int xi, int yi, std::int64_t zc) const {
    return counts[static_cast<std::size_t>((zc * rx + xi) * ry + yi)];
  }
  std::int64_t total() const;
};

ContingencyTable contingency_counts(const Dataset& d, Node x, Node y, const NodeSet& z,
                                    std::int64_t cell_cap = kDefaultCellCap);

struct G2Result {
  double g2 = 0.0;
  std::int64_t dof = 0;
};

/// Zero cells contribute nothing; dof is not reduced for structural zeros.
G2Result g2_statistic(const ContingencyTable& table);

/// Q(dof / 2, stat / 2). Throws std::invalid_argument for dof < 1 or stat < 0.
double chi_square_survival(double stat, std::int64_t dof);

/// Canonical identity of a CI statement: x < y, z sorted.
struct FactKey {
  Node x = 0;
  Node y = 0;
  NodeSet z;

  friend auto operator<=>(const FactKey&, const FactKey&) = default;
  friend bool operator==(const FactKey&, const FactKey&) = default;
};

/// Where in the skeleton search a test was executed. The full zero-order
/// sweep is flagged apart from later adjacency-driven tests.
enum class TestStage : std::uint8_t { unspecified, sweep, skeleton, majority };

struct CiStatement {
  Node x = 0;
  Node y = 0;
  NodeSet z;
  bool independent = false;
  double g2 = 0.0;
  std::int64_t dof = 1;
  double p_value = 0.0;
  double credibility = 0.0;
  /// False when the sample-size guard fired; such tests are reported dependent.
  bool reliable = true;
  TestStage stage = TestStage::unspecified;

  FactKey key() const { return {x, y, z}; }
};

/// Orders x < y and sorts z in place.
void canonicalize(CiStatement& s);

/// Independent: (p - alpha) / (1 - alpha). Dependent: (alpha - p) / alpha.
/// Clamped to [0, 1]; unreliable statements get 0.
double credibility(const CiStatement& s, double alpha);

struct CiOptions {
  double alpha = 0.05;
  /// When positive, tests with N < min_samples_per_dof * dof are unreliable.
  int min_samples_per_dof = 0;
  std::int64_t cell_cap = kDefaultCellCap;
};

CiStatement ci_test(const Dataset& d, Node x, Node y, const NodeSet& z, const CiOptions& options);

/// Source of CI verdicts for the skeleton search: data-backed or graph oracle.
class CiTester {
 public:
  virtual ~CiTester() = default;
  virtual int num_vars() const = 0;
  virtual double alpha() const = 0;
  virtual CiStatement test(Node x, Node y, const NodeSet& z) const = 0;
};

class DataCiTester final : public CiTester {
 public:
  DataCiTester(const Dataset& data, CiOptions options) : data_(data), options_(options) {}
  int num_vars() const override { return data_.num_vars(); }
  double alpha() const override { return options_.alpha; }
  CiStatement test(Node x, Node y, const NodeSet& z) const override;

 private:
  const Dataset& data_;
  CiOptions options_;
};

/// Answers every query by d-separation in a known DAG with p in {0, 1}.
class OracleCiTester final : public CiTester {
 public:
  explicit OracleCiTester(Dag truth, double alpha = 0.05) : truth_(std::move(truth)), alpha_(alpha) {}
  int num_vars() const override { return truth_.size(); }
  double alpha() const override { return alpha_; }
  CiStatement test(Node x, Node y, const NodeSet& z) const override;

 private:
  Dag truth_;
  double alpha_;
};

}  // namespace argcd

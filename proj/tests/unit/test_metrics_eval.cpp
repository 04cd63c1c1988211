// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <boost/math/distributions/students_t.hpp>
#include <random>

#include "argcd/metrics.hpp"
#include "argcd/skeleton.hpp"
#include "argcd/solver.hpp"
#include "oracles.hpp"

using namespace argcd;

namespace {

constexpr Node E = 0, R = 1, O = 2, I = 3;

// E - O, R -> O, E - I, I -> O.
Pdag example_mpc_output() { return Pdag(4, {{R, O}, {I, O}}, {{E, O}, {E, I}}); }

}  // namespace

TEST(Shd, Basics) {
  const auto g = oracle::example_one();
  EXPECT_EQ(shd(g, g), 0);
  EXPECT_EQ(shd(Dag(2), Dag(2, {{0, 1}})), 1);
  EXPECT_EQ(shd(Dag(2, {{1, 0}}), Dag(2, {{0, 1}})), 1);
  EXPECT_EQ(shd(Pdag(2, {}, {{0, 1}}), Dag(2, {{0, 1}})), 1);
  EXPECT_THROW(shd(Dag(3), Dag(2)), MetricsError);
}

TEST(Shd, ExampleAgainstMpcOutput) {
  EXPECT_EQ(shd(example_mpc_output(), oracle::example_one()), 3);
  EXPECT_DOUBLE_EQ(shd_normalized(example_mpc_output(), oracle::example_one()), 0.5);
  EXPECT_DOUBLE_EQ(shd_normalized(Pdag(1, {}, {}), Dag(1)), 0.0);
}

TEST(Shd, SymmetricOnDags) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    const auto a = oracle::random_dag(6, 0.4, rng);
    const auto b = oracle::random_dag(6, 0.4, rng);
    ASSERT_EQ(shd(a, b), shd(b, a));
  }
}

TEST(F1, StrictExample) {
  const auto r = precision_recall_f1(example_mpc_output(), oracle::example_one(), F1Mode::strict);
  EXPECT_DOUBLE_EQ(r.precision, 0.25);
  EXPECT_DOUBLE_EQ(r.recall, 0.25);
  EXPECT_DOUBLE_EQ(r.f1, 0.25);
}

TEST(F1, CpdagAwareCountsUndirectedHalf) {
  const auto r = precision_recall_f1(example_mpc_output(), oracle::example_one(), F1Mode::cpdag_aware);
  EXPECT_DOUBLE_EQ(r.precision, 0.5);
  EXPECT_DOUBLE_EQ(r.recall, 0.5);
  EXPECT_DOUBLE_EQ(r.f1, 0.5);
}

TEST(F1, Conventions) {
  const auto g = oracle::example_one();
  const auto same = precision_recall_f1(Pdag::from_dag(g), g);
  EXPECT_DOUBLE_EQ(same.f1, 1.0);
  const auto empty = precision_recall_f1(Pdag(4, {}, {}), g);
  EXPECT_DOUBLE_EQ(empty.precision, 0.0);
  EXPECT_DOUBLE_EQ(empty.recall, 0.0);
  EXPECT_DOUBLE_EQ(empty.f1, 0.0);
  const auto both_empty = precision_recall_f1(Pdag(3, {}, {}), Dag(3));
  EXPECT_DOUBLE_EQ(both_empty.f1, 1.0);
  const auto wrong = precision_recall_f1(Pdag(2, {{1, 0}}, {}), Dag(2, {{0, 1}}));
  EXPECT_DOUBLE_EQ(wrong.f1, 0.0);
  EXPECT_STREQ(to_string(F1Mode::cpdag_aware), "cpdag_aware");
}

TEST(Sid, IdentityIsZero) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    const auto g = oracle::random_dag(6, 0.4, rng);
    ASSERT_EQ(sid(g, g), 0);
  }
}

TEST(Sid, TwoNodeCases) {
  const Dag truth(2, {{0, 1}});
  // Empty estimate: pair (0, 1) is fine; pair (1, 0) adjusts for nothing and
  // leaves the path 1 <- 0 open, so it counts.
  EXPECT_EQ(sid(Dag(2), truth), 1);
  EXPECT_EQ(oracle::sid(Dag(2), truth), 1);
  // Reversed estimate: PA_est(0) = {1}, a descendant of 0.
  EXPECT_GE(sid(Dag(2, {{1, 0}}), truth), 1);
  EXPECT_EQ(sid(Dag(2, {{1, 0}}), truth), oracle::sid(Dag(2, {{1, 0}}), truth));
  EXPECT_EQ(sid(truth, Dag(2)), 0);
}

TEST(Sid, ExhaustiveThreeNodes) {
  const auto dags = oracle::all_dags(3);
  for (const auto& est : dags) {
    for (const auto& truth : dags) ASSERT_EQ(sid(est, truth), oracle::sid(est, truth));
  }
}

TEST(Sid, SampledFiveNodePairs) {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 200; ++rep) {
    const auto est = oracle::random_dag(5, 0.4, rng);
    const auto truth = oracle::random_dag(5, 0.4, rng);
    ASSERT_EQ(sid(est, truth), oracle::sid(est, truth));
  }
}

TEST(Welch, IdenticalGroupsGiveOne) {
  const std::vector<double> a{1, 2, 3, 4};
  const auto w = welch_t_test(a, a);
  EXPECT_DOUBLE_EQ(w.p_value, 1.0);
  const auto c = welch_bh({{"a", a}, {"b", a}, {"c", a}});
  ASSERT_EQ(c.size(), 3u);
  for (const auto& x : c) {
    EXPECT_DOUBLE_EQ(x.test.p_value, 1.0);
    EXPECT_DOUBLE_EQ(x.p_adjusted, 1.0);
    EXPECT_FALSE(x.significant);
  }
  EXPECT_DOUBLE_EQ(welch_t_test({2, 2, 2}, {2, 2, 2}).p_value, 1.0);
}

TEST(Welch, MaximalSeparation) {
  EXPECT_DOUBLE_EQ(welch_t_test({0, 0, 0, 0}, {1, 1, 1, 1}).p_value, 0.0);
  const auto w = welch_t_test({0, 0, 0, 1e-9}, {1, 1, 1, 1});
  EXPECT_LT(w.p_value, 1e-6);
  EXPECT_THROW(welch_t_test({1}, {1, 2}), MetricsError);
}

TEST(Welch, MatchesIntegrationOracle) {
  const std::vector<std::pair<std::vector<double>, std::vector<double>>> groups{
      {{0.31, 0.42, 0.28, 0.39, 0.35}, {0.45, 0.52, 0.48, 0.41, 0.56, 0.50}},
      {{1, 2, 3, 4, 5, 6, 7}, {2, 4, 6}},
      {{0.1, 0.2}, {0.15, 0.3}},
      {{10, 11, 12, 13}, {9.5, 12.5, 11, 14, 10}},
  };
  for (const auto& [a, b] : groups) {
    const auto w = welch_t_test(a, b);
    // Statistic and dof from the textbook formulas.
    const double va = stddev(a) * stddev(a) / a.size(), vb = stddev(b) * stddev(b) / b.size();
    EXPECT_NEAR(w.t, (mean(a) - mean(b)) / std::sqrt(va + vb), 1e-12);
    EXPECT_NEAR(w.dof, (va + vb) * (va + vb) / (va * va / (a.size() - 1) + vb * vb / (b.size() - 1)), 1e-9);
    EXPECT_NEAR(w.p_value, oracle::t_two_sided_p(w.t, w.dof), 1e-6);
    boost::math::students_t dist(w.dof);
    EXPECT_NEAR(w.p_value, 2 * boost::math::cdf(boost::math::complement(dist, std::abs(w.t))), 1e-10);
  }
}

TEST(BenjaminiHochberg, KnownValues) {
  const auto adj = benjamini_hochberg({0.01, 0.04, 0.03, 0.20});
  EXPECT_NEAR(adj[0], 0.04, 1e-12);
  EXPECT_NEAR(adj[1], 0.04 * 4 / 3, 1e-12);
  EXPECT_NEAR(adj[2], 0.04 * 4 / 3, 1e-12);
  EXPECT_NEAR(adj[3], 0.20, 1e-12);
  EXPECT_TRUE(benjamini_hochberg({}).empty());
}

TEST(BenjaminiHochberg, MonotoneAndNotBelowRaw) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> p(1 + rep % 12);
    for (auto& x : p) x = u(rng) * u(rng);
    const auto adj = benjamini_hochberg(p);
    for (std::size_t i = 0; i < p.size(); ++i) {
      EXPECT_GE(adj[i], p[i]);
      EXPECT_LE(adj[i], 1.0);
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (p[i] < p[j]) {
          EXPECT_LE(adj[i], adj[j]);
        }
      }
    }
  }
}

TEST(RandomBaseline, DeterministicAndDensityMatched) {
  EXPECT_EQ(random_baseline(8, 0.3, 5), random_baseline(8, 0.3, 5));
  double total = 0;
  for (std::uint64_t s = 0; s < 400; ++s) total += edge_density(random_baseline(8, 0.3, s));
  EXPECT_NEAR(total / 400, 0.3, 0.02);
  EXPECT_DOUBLE_EQ(edge_density(oracle::example_one()), 4.0 / 6.0);
}

TEST(RandomBaseline, BelowSolverOnOracleFacts) {
  double solver_f1 = 0, random_f1 = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    std::mt19937_64 rng(s);
    const auto truth = oracle::random_dag(5, 0.4, rng);
    OracleCiTester t(truth);
    const auto facts = learn_skeleton(t).facts;
    const auto red = reduce_skeleton(facts, 5, 1.0);
    const auto sol = solve(make_solver_input(5, facts, red, apply_semantic_constraints(red, {}, {})));
    solver_f1 += precision_recall_f1(Pdag::from_dag(sol.dag), truth).f1;
    random_f1 += precision_recall_f1(Pdag::from_dag(random_baseline(5, edge_density(truth), s)), truth).f1;
  }
  EXPECT_LT(random_f1 / 20, solver_f1 / 20);
}

TEST(Summary, MeanAndStddev) {
  EXPECT_DOUBLE_EQ(mean({1, 2, 3}), 2.0);
  EXPECT_DOUBLE_EQ(stddev({1, 2, 3}), 1.0);
  EXPECT_DOUBLE_EQ(stddev({5}), 0.0);
}

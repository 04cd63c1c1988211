// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "argcd/skeleton.hpp"
#include "argcd/solver.hpp"
#include "oracles.hpp"

using namespace argcd;

namespace {

constexpr Node E = 0, R = 1, O = 2, I = 3;

CiStatement fact(Node x, Node y, NodeSet z, bool independent, double cred) {
  CiStatement s;
  s.x = x;
  s.y = y;
  s.z = std::move(z);
  s.independent = independent;
  s.credibility = cred;
  s.p_value = independent ? 0.05 + 0.95 * cred : 0.05 * (1.0 - cred);
  return s;
}

Reduction all_pairs(int n) { return reduce_skeleton({}, n, 2.0); }

SolverInput plain_input(int n, std::vector<CiStatement> facts, SolverConfig cfg = {}) {
  const auto red = all_pairs(n);
  return make_solver_input(n, std::move(facts), red, apply_semantic_constraints(red, {}, {}), cfg);
}

std::vector<CiStatement> example_facts_with_spurious() {
  auto facts = oracle::all_oracle_facts(oracle::example_one());
  facts.push_back(fact(E, R, {O}, true, 0.01));
  return facts;
}

}  // namespace

TEST(Reduce, OracleIndependenceRemovesPair) {
  const auto red = reduce_skeleton({fact(E, R, {}, true, 1.0)}, 4, 1.0);
  EXPECT_EQ(red.removed, (std::vector<Edge>{{E, R}}));
  EXPECT_EQ(red.candidates.size(), 5u);
}

TEST(Reduce, UnreachableThresholdDisablesReduction) {
  const auto red = reduce_skeleton({fact(E, R, {}, true, 1.0)}, 4, 1.0 + 1e-9);
  EXPECT_TRUE(red.removed.empty());
  EXPECT_EQ(red.candidates.size(), 6u);
}

TEST(Reduce, DependentFactsNeverRemove) {
  const auto red = reduce_skeleton({fact(0, 1, {}, false, 1.0), fact(1, 2, {0}, false, 1.0)}, 3, 0.5);
  EXPECT_TRUE(red.removed.empty());
}

TEST(Reduce, FromSkeleton) {
  const auto red = reduce_to_skeleton(Pdag(3, {}, {{0, 1}}));
  EXPECT_EQ(red.candidates, (std::vector<Edge>{{0, 1}}));
  EXPECT_EQ(red.removed, (std::vector<Edge>{{0, 2}, {1, 2}}));
}

TEST(Semantic, RequiredOnCandidateKept) {
  const auto red = reduce_skeleton({fact(E, R, {}, true, 1.0)}, 4, 1.0);
  const auto sem = apply_semantic_constraints(red, {{E, O}}, {});
  EXPECT_EQ(sem.required, (std::vector<Edge>{{E, O}}));
  EXPECT_TRUE(sem.dropped_required.empty());
}

TEST(Semantic, RequiredOnRemovedPairDropped) {
  const auto red = reduce_skeleton({fact(E, R, {}, true, 1.0)}, 4, 1.0);
  const auto sem = apply_semantic_constraints(red, {{E, R}}, {});
  EXPECT_TRUE(sem.required.empty());
  EXPECT_EQ(sem.dropped_required, (std::vector<Edge>{{E, R}}));
}

TEST(Semantic, MutuallyRequiredPairDropped) {
  const auto sem = apply_semantic_constraints(all_pairs(3), {{0, 1}, {1, 0}}, {});
  EXPECT_TRUE(sem.required.empty());
  EXPECT_FALSE(sem.warnings.empty());
}

TEST(Semantic, RequiredAndForbiddenSameArrowBothDropped) {
  const auto sem = apply_semantic_constraints(all_pairs(3), {{0, 1}}, {{0, 1}, {2, 1}});
  EXPECT_TRUE(sem.required.empty());
  EXPECT_EQ(sem.forbidden, (std::vector<Edge>{{2, 1}}));
  EXPECT_FALSE(sem.warnings.empty());
}

TEST(Semantic, ForbiddenOnRemovedPairIsVacuous) {
  const auto red = reduce_skeleton({fact(E, R, {}, true, 1.0)}, 4, 1.0);
  const auto sem = apply_semantic_constraints(red, {}, {{R, E}});
  EXPECT_EQ(sem.forbidden, (std::vector<Edge>{{R, E}}));
  EXPECT_EQ(sem.vacuous_forbidden, (std::vector<Edge>{{R, E}}));
}

TEST(Semantic, UnknownEndpointRejected) {
  EXPECT_THROW(apply_semantic_constraints(all_pairs(3), {{0, 7}}, {}), SolverError);
}

TEST(Solve, ExampleDemotesOnlySpuriousFact) {
  const auto input = plain_input(4, example_facts_with_spurious());
  const auto sol = solve(input);
  EXPECT_TRUE(sol.complete);
  EXPECT_EQ(sol.dag, oracle::example_one());
  ASSERT_EQ(sol.demoted.size(), 1u);
  EXPECT_EQ(sol.demoted[0].x, E);
  EXPECT_EQ(sol.demoted[0].y, R);
  EXPECT_EQ(sol.demoted[0].z, NodeSet{O});
  EXPECT_TRUE(sol.demoted[0].independent);
  EXPECT_TRUE(check_correspondence(sol.dag, sol.accepted));
}

TEST(Solve, ExampleWithSkeletonReduction) {
  const auto truth = oracle::example_one();
  OracleCiTester t(truth);
  auto mpc = mpc_cpdag(t);
  auto facts = mpc.skeleton.facts;
  facts.push_back(fact(E, R, {O}, true, 0.01));
  const auto red = reduce_to_skeleton(mpc.skeleton.skeleton);
  const auto sol = solve(make_solver_input(4, facts, red, apply_semantic_constraints(red, {}, {})));
  EXPECT_EQ(sol.dag, truth);
  EXPECT_EQ(sol.demoted.size(), 1u);
}

TEST(Solve, NoFactsGivesEmptyDag) {
  const auto sol = solve(plain_input(4, {}));
  EXPECT_EQ(sol.dag.num_edges(), 0u);
  EXPECT_TRUE(sol.accepted.empty());
}

TEST(Solve, RequiredArrowsAreHonoured) {
  const auto red = all_pairs(3);
  const auto sem = apply_semantic_constraints(red, {{2, 0}, {1, 0}}, {});
  const auto sol = solve(make_solver_input(3, {}, red, sem));
  EXPECT_TRUE(sol.dag.has_edge(2, 0));
  EXPECT_TRUE(sol.dag.has_edge(1, 0));
}

TEST(Solve, ForbiddenArrowFlipsOrientation) {
  // A dependence forces 0 - 1 adjacent; the default tie-break would pick 0 -> 1.
  const auto red = all_pairs(2);
  auto sol = solve(make_solver_input(2, {fact(0, 1, {}, false, 1.0)}, red, apply_semantic_constraints(red, {}, {})));
  EXPECT_TRUE(sol.dag.has_edge(0, 1));
  sol = solve(make_solver_input(2, {fact(0, 1, {}, false, 1.0)}, red, apply_semantic_constraints(red, {}, {{0, 1}})));
  EXPECT_TRUE(sol.dag.has_edge(1, 0));
}

TEST(Solve, RequiredCycleIsAHardError) {
  const auto red = all_pairs(3);
  const auto sem = apply_semantic_constraints(red, {{0, 1}, {1, 2}, {2, 0}}, {});
  EXPECT_THROW(solve(make_solver_input(3, {}, red, sem)), SolverError);
}

TEST(Solve, ZeroDemotionsOnConsistentOracleFacts) {
  const oracle::MecIndex mec(4);
  for (const auto& g : oracle::all_dags(4)) {
    const auto sol = solve(plain_input(4, oracle::all_oracle_facts(g)));
    ASSERT_TRUE(sol.demoted.empty());
    ASSERT_TRUE(mec.same_class(sol.dag, g));
  }
}

TEST(Solve, RelaxationDemotesLeastCredibleFirst) {
  // Contradictory pair on the same key at different credibilities, plus an
  // unrelated low-credibility fact that is consistent.
  std::vector<CiStatement> facts{fact(0, 1, {}, true, 0.9), fact(0, 1, {}, false, 0.4), fact(1, 2, {}, false, 0.1)};
  const auto sol = solve(plain_input(3, facts));
  ASSERT_EQ(sol.demoted.size(), 2u);
  // Demotion is a prefix of ascending credibility: 0.1 then 0.4.
  EXPECT_DOUBLE_EQ(sol.demoted[0].credibility, 0.4);
  EXPECT_DOUBLE_EQ(sol.demoted[1].credibility, 0.1);
  EXPECT_TRUE(d_separated(sol.dag, 0, 1, {}));
}

TEST(Solve, MaximizeKeepsConsistentLowFact) {
  std::vector<CiStatement> facts{fact(0, 1, {}, true, 0.9), fact(0, 1, {}, false, 0.4), fact(1, 2, {}, false, 0.1)};
  SolverConfig cfg;
  cfg.mode = SolverMode::maximize;
  const auto sol = solve(plain_input(3, facts, cfg));
  ASSERT_EQ(sol.demoted.size(), 1u);
  EXPECT_DOUBLE_EQ(sol.demoted[0].credibility, 0.4);
  EXPECT_NEAR(sol.optimum_weight, 1.0, 1e-9);
  const auto relax = solve(plain_input(3, facts));
  EXPECT_GE(sol.optimum_weight + 1e-9, relax.optimum_weight);
}

TEST(Solve, MaxDemotionsCap) {
  std::vector<CiStatement> facts{fact(0, 1, {}, true, 0.9), fact(0, 1, {}, false, 0.4), fact(1, 2, {}, false, 0.1)};
  SolverConfig cfg;
  cfg.max_demotions = 1;
  EXPECT_THROW(solve(plain_input(3, facts, cfg)), SolverError);
}

TEST(Solve, TimeBudgetFlagsIncompleteButValid) {
  std::mt19937_64 rng(2);
  const auto g = oracle::random_dag(9, 0.4, rng);
  OracleCiTester t(g);
  auto facts = learn_skeleton(t).facts;
  // Flip a handful of verdicts so the search has to work.
  for (std::size_t k = 0; k < facts.size(); k += 7) {
    facts[k].independent = !facts[k].independent;
    facts[k].credibility = 0.5;
  }
  SolverConfig cfg;
  cfg.time_budget_s = 0.0;
  const auto input = plain_input(9, facts, cfg);
  const auto sol = solve(input);
  EXPECT_FALSE(sol.complete);
  EXPECT_NO_THROW(validate_solution(input, sol));
}

TEST(Solve, TraceCoversEveryFact) {
  const auto input = plain_input(4, example_facts_with_spurious());
  const auto sol = solve(input);
  EXPECT_EQ(sol.trace.size(), input.facts.size());
  int demoted = 0;
  for (const auto& t : sol.trace) {
    if (t.status == FactStatus::demoted) {
      ++demoted;
      EXPECT_FALSE(t.holds);
      EXPECT_NE(t.reason.find("demoted"), std::string::npos);
    }
  }
  EXPECT_EQ(demoted, 1);
  const auto text = render_trace(sol, {"E", "R", "O", "I"});
  EXPECT_NE(text.find("E _||_ R | O"), std::string::npos);
  const auto j = solution_to_json(sol, {"E", "R", "O", "I"});
  EXPECT_EQ(j.at("demoted").size(), 1u);
  EXPECT_EQ(j.at("dag").at("edges").size(), 4u);
  EXPECT_TRUE(j.at("complete").get<bool>());
}

TEST(Solve, AddingConsistentRequiredArrowKeepsResult) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 40; ++rep) {
    const auto g = oracle::random_dag(5, 0.4, rng);
    OracleCiTester t(g);
    auto facts = learn_skeleton(t).facts;
    const auto red = all_pairs(5);
    const auto base = solve(make_solver_input(5, facts, red, apply_semantic_constraints(red, {}, {})));
    if (base.dag.num_edges() == 0) continue;
    const Edge e = base.dag.edges()[rep % base.dag.num_edges()];
    const auto with = solve(make_solver_input(5, facts, red, apply_semantic_constraints(red, {e}, {})));
    EXPECT_EQ(with.dag, base.dag);
  }
}

TEST(Correspondence, Examples) {
  const auto g = oracle::example_one();
  EXPECT_TRUE(check_correspondence(g, {fact(E, R, {}, true, 1.0)}));
  EXPECT_FALSE(check_correspondence(g, {fact(E, R, {O}, true, 1.0)}));
  EXPECT_TRUE(check_correspondence(g, {}));
}

TEST(Enumerate, ChainOracleGivesItsClass) {
  const Dag chain(3, {{0, 1}, {1, 2}});
  const auto dags = enumerate_consistent_dags(plain_input(3, oracle::all_oracle_facts(chain)), 100);
  std::set<std::vector<Edge>> got;
  for (const auto& d : dags) got.insert(d.edges());
  const std::set<std::vector<Edge>> want{{{0, 1}, {1, 2}}, {{1, 0}, {2, 1}}, {{1, 0}, {1, 2}}};
  EXPECT_EQ(got, want);
}

TEST(Enumerate, ContradictionGivesNothing) {
  const auto dags = enumerate_consistent_dags(plain_input(2, {fact(0, 1, {}, true, 1.0), fact(0, 1, {}, false, 1.0)}), 10);
  EXPECT_TRUE(dags.empty());
}

TEST(Enumerate, TwoNodesNoFacts) { EXPECT_EQ(enumerate_consistent_dags(plain_input(2, {}), 10).size(), 3u); }

TEST(Enumerate, GuardsLargeInputs) { EXPECT_THROW(enumerate_consistent_dags(plain_input(7, {}), 10), SolverError); }

TEST(Enumerate, SolverResultIsFirstConsistentDag) {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 30; ++rep) {
    const auto g = oracle::random_dag(5, 0.5, rng);
    const auto input = plain_input(5, oracle::all_oracle_facts(g));
    const auto dags = enumerate_consistent_dags(input, 1000);
    ASSERT_FALSE(dags.empty());
    EXPECT_EQ(solve(input).dag, dags.front());
    const oracle::MecIndex* none = nullptr;
    (void)none;
    for (const auto& d : dags) EXPECT_EQ(oracle::dsep_signature(d), oracle::dsep_signature(g));
  }
}

TEST(Input, InvariantViolationsRejected) {
  SolverInput in;
  in.n = 3;
  in.candidate_edges = {{0, 1}};
  in.removed_edges = {{0, 1}};
  EXPECT_THROW(validate_input(in), SolverError);
  in.removed_edges = {};
  in.required = {{0, 2}};
  EXPECT_THROW(validate_input(in), SolverError);
  in.required = {{0, 1}};
  in.forbidden = {{0, 1}};
  EXPECT_THROW(validate_input(in), SolverError);
}

// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "argcd/graph_io.hpp"
#include "argcd/metrics.hpp"
#include "argcd/pipeline.hpp"
#include "oracles.hpp"

using namespace argcd;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kFixtures(ARGCD_FIXTURES);

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("argcd_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// Runs the tool with stdout and stderr captured; returns the exit status.
int run_cli(const std::string& args, std::string* output = nullptr) {
  const auto log = fs::temp_directory_path() / ("argcd_cli_out_" + std::to_string(::getpid()) + ".txt");
  const std::string cmd = std::string("\"") + ARGCD_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  if (output) *output = slurp(log);
  fs::remove(log);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

// Truth graph of a fixture benchmark written in index form.
fs::path write_truth(const std::string& bench, const fs::path& dir) {
  const auto vars = read_json(kFixtures / "llm" / bench / "variables.json").at("variables");
  std::vector<std::string> names;
  for (const auto& v : vars) names.push_back(v.at("name"));
  std::vector<Edge> edges;
  const auto truth = read_json(kFixtures / "llm" / bench / "truth.json");
  for (const auto& e : truth.at("edges")) {
    const auto u = std::find(names.begin(), names.end(), e[0].get<std::string>()) - names.begin();
    const auto v = std::find(names.begin(), names.end(), e[1].get<std::string>()) - names.begin();
    edges.emplace_back(static_cast<Node>(u), static_cast<Node>(v));
  }
  const auto p = dir / (bench + "_truth.json");
  write(p, graph_to_json(Dag(static_cast<int>(names.size()), edges)).dump());
  return p;
}

}  // namespace

TEST(Config, DefaultsAndOverrides) {
  const auto cfg = resolve_config("discover", {{"alpha", 0.01}, {"output", "x"}});
  EXPECT_DOUBLE_EQ(cfg.at("alpha").get<double>(), 0.01);
  EXPECT_EQ(cfg.at("solver_mode"), "relaxation");
  EXPECT_EQ(default_config("elicit").at("k"), 5);
  EXPECT_EQ(default_config("genbench").at("cardinality_range"), json({2, 4}));
}

TEST(Config, UnknownKeysAndBadTypesRejected) {
  EXPECT_THROW(resolve_config("discover", {{"alpah", 0.05}}), ConfigError);
  EXPECT_THROW(resolve_config("discover", {{"alpha", "small"}}), ConfigError);
  EXPECT_THROW(resolve_config("discover", {{"llm", {{"bogus", 1}}}}), ConfigError);
  EXPECT_THROW(resolve_config("launch", json::object()), ConfigError);
  EXPECT_NO_THROW(resolve_config("discover", {{"llm", {{"mode", "fixture"}, {"k", 3}}}}));
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("codes");
  std::string out;
  EXPECT_EQ(run_cli("--version", &out), 0);
  EXPECT_NE(out.find("0.1.0"), std::string::npos);
  EXPECT_EQ(run_cli("discover --no-such-flag", &out), 1);
  write(dir / "bad.json", R"({"alpah": 0.05})");
  EXPECT_EQ(run_cli("discover --config " + q(dir / "bad.json") + " -o " + q(dir / "o"), &out), 1);
  EXPECT_NE(out.find("alpah"), std::string::npos);
  EXPECT_EQ(run_cli("discover -o " + q(dir / "o"), &out), 1);
  EXPECT_EQ(run_cli("elicit --variables " + q(kFixtures / "llm" / "smoking" / "variables.json") + " --mode live --endpoint http://127.0.0.1:9/v1 --model m --api-key-env ARGCD_TEST_NO_SUCH_KEY -o " + q(dir / "e"), &out), 1);
  EXPECT_NE(out.find("ARGCD_TEST_NO_SUCH_KEY"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, OracleDiscoveryRecoversExampleGraph) {
  const auto dir = scratch("oracle");
  write(dir / "truth.json", graph_to_json(oracle::example_one()).dump());
  write(dir / "vars.json", R"(["E", "R", "O", "I"])");
  std::string out;
  ASSERT_EQ(run_cli("discover --oracle --truth " + q(dir / "truth.json") + " --variables " + q(dir / "vars.json") +
                        " -o " + q(dir / "out"),
                    &out),
            0)
      << out;
  const auto sol = read_json(dir / "out" / "run" / "solution_abapc.json");
  EXPECT_EQ(dag_from_json(sol.at("dag")), oracle::example_one());
  EXPECT_TRUE(sol.at("demoted").empty());
  const auto rows = read_results_csv(dir / "out" / "results.csv");
  ASSERT_FALSE(rows.empty());
  for (const auto& r : rows) {
    if (r.method == "ABAPC") {
      EXPECT_EQ(r.shd, 0);
      EXPECT_EQ(r.sid, 0);
      EXPECT_DOUBLE_EQ(r.f1, 1.0);
    }
  }
  EXPECT_TRUE(fs::exists(dir / "out" / "config.resolved.json"));
  EXPECT_TRUE(fs::exists(dir / "out" / "run" / "facts.jsonl"));
  EXPECT_EQ(read_json(dir / "out" / "run_info.json").at("tool_version"), "0.1.0");
  fs::remove_all(dir);
}

TEST(Cli, FixtureElicitationEqualsInjectedConstraints) {
  const auto dir = scratch("inject");
  const auto truth = write_truth("smoking", dir);
  const auto vars = kFixtures / "llm" / "smoking" / "variables.json";
  const auto fixtures = kFixtures / "llm" / "responses";
  std::string out;
  ASSERT_EQ(run_cli("elicit --variables " + q(vars) + " --fixtures " + q(fixtures) + " -o " + q(dir / "el"), &out), 0)
      << out;
  const auto base = "discover --oracle --truth " + q(truth) + " --variables " + q(vars);
  ASSERT_EQ(run_cli(base + " --constraints " + q(dir / "el" / "constraints.json") + " -o " + q(dir / "a"), &out), 0) << out;
  ASSERT_EQ(run_cli(base + " --llm-mode fixture --llm-fixtures " + q(fixtures) + " -o " + q(dir / "b"), &out), 0) << out;
  EXPECT_EQ(slurp(dir / "a" / "constraints.used.json"), slurp(dir / "b" / "constraints.used.json"));
  auto strip = [](json s) {
    s.erase("wall_time_s");
    return s;
  };
  EXPECT_EQ(strip(read_json(dir / "a" / "run" / "solution_abapc_llm.json")),
            strip(read_json(dir / "b" / "run" / "solution_abapc_llm.json")));
  EXPECT_EQ(read_json(dir / "el" / "constraints.json"), read_json(dir / "b" / "elicitation" / "constraints.json"));
  fs::remove_all(dir);
}

TEST(Cli, ElicitationIsByteReproducible) {
  const auto dir = scratch("replay");
  const auto args = "elicit --variables " + q(kFixtures / "llm" / "economy" / "variables.json") + " --fixtures " +
                    q(kFixtures / "llm" / "responses");
  ASSERT_EQ(run_cli(args + " -o " + q(dir / "a")), 0);
  ASSERT_EQ(run_cli(args + " -o " + q(dir / "b")), 0);
  for (const char* f : {"constraints.json", "prompt.txt", "prompt_template.txt", "responses/parsed_3.json"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  ASSERT_EQ(run_cli(args + " --k 1 -o " + q(dir / "one")), 0);
  auto arrows = [](const json& list) {
    std::set<std::pair<std::string, std::string>> s;
    for (const auto& a : list) s.emplace(a[0], a[1]);
    return s;
  };
  EXPECT_EQ(arrows(read_json(dir / "one" / "constraints.json").at("required")),
            arrows(read_json(dir / "a" / "responses" / "parsed_1.json").at("required")));
  std::string out;
  EXPECT_EQ(run_cli(args + " --k 9 -o " + q(dir / "nine"), &out), 2);
  EXPECT_NE(out.find("fixture missing"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, GenbenchIsReproducible) {
  const auto dir = scratch("gen");
  const auto args = "genbench --kg " + q(kFixtures / "kg" / "mini_kg.tsv") +
                    " --kind lower_triangular erdos_renyi --nodes 4 --seed 1 2 --samples 300 --cap 300";
  std::string out;
  ASSERT_EQ(run_cli(args + " -o " + q(dir / "a"), &out), 0) << out;
  ASSERT_EQ(run_cli(args + " -o " + q(dir / "b"), &out), 0) << out;
  const auto a = read_json(dir / "a" / "index.json");
  const auto b = read_json(dir / "b" / "index.json");
  ASSERT_EQ(a.size(), 4u);
  EXPECT_EQ(a, b);
  for (const auto& e : a) {
    EXPECT_EQ(e.at("status"), "ok");
    EXPECT_TRUE(fs::exists(dir / "a" / e.at("cell").get<std::string>() / "data.csv"));
  }
  // A bundle feeds straight into discover.
  const auto cell = dir / "a" / a[0].at("cell").get<std::string>();
  ASSERT_EQ(run_cli("discover --bundle " + q(cell) + " --reps 2 --samples 500 -o " + q(dir / "d"), &out), 0) << out;
  EXPECT_TRUE(fs::exists(dir / "d" / "rep_001" / "solution_abapc.json"));
  fs::remove_all(dir);
}

TEST(Cli, EvalSummaryMatchesHandAggregation) {
  const auto dir = scratch("eval");
  std::vector<ResultRow> rows;
  const double shd_a[] = {2, 4, 3}, shd_b[] = {5, 6, 7};
  for (int i = 0; i < 3; ++i) {
    rows.push_back({"A", "d", std::uint64_t(i), int(shd_a[i]), shd_a[i] / 10, 1, 0.5, 0.5, 0.5 + 0.1 * i, 0.1, "strict"});
    rows.push_back({"B", "d", std::uint64_t(i), int(shd_b[i]), shd_b[i] / 10, -1, 0.2, 0.3, 0.2, 0.2, "cpdag_aware"});
  }
  write_results_csv(dir / "results.csv", rows);
  std::string out;
  ASSERT_EQ(run_cli("eval --results " + q(dir / "results.csv") + " --metrics shd f1 -o " + q(dir / "ev"), &out), 0)
      << out;
  const auto s = read_json(dir / "ev" / "summary.json");
  EXPECT_NEAR(s["methods"]["A"]["shd"]["mean"].get<double>(), 3.0, 1e-12);
  EXPECT_NEAR(s["methods"]["A"]["shd"]["std"].get<double>(), 1.0, 1e-12);
  EXPECT_NEAR(s["methods"]["B"]["shd"]["mean"].get<double>(), 6.0, 1e-12);
  EXPECT_NEAR(s["methods"]["A"]["f1"]["mean"].get<double>(), 0.6, 1e-12);
  EXPECT_EQ(s["methods"]["B"]["f1_mode"], "cpdag_aware");
  EXPECT_FALSE(s["methods"]["B"].contains("sid"));
  const auto cmp = s["comparisons"]["shd"];
  ASSERT_EQ(cmp.size(), 1u);
  const auto w = welch_t_test({2, 4, 3}, {5, 6, 7});
  EXPECT_NEAR(cmp[0]["p_value"].get<double>(), w.p_value, 1e-12);
  EXPECT_TRUE(fs::exists(dir / "ev" / "plot.svg"));
  EXPECT_NE(slurp(dir / "ev" / "plot.svg").find("<svg"), std::string::npos);
  EXPECT_EQ(read_results_csv(dir / "ev" / "results.csv").size(), rows.size());
  fs::remove_all(dir);
}

TEST(Cli, EvalIdenticalMethodsAreNotSignificant) {
  const auto dir = scratch("evalsame");
  std::vector<ResultRow> rows;
  for (int i = 0; i < 4; ++i) {
    for (const char* m : {"A", "B", "C"}) rows.push_back({m, "d", std::uint64_t(i), i, i / 6.0, i, 0.5, 0.5, 0.5, 0.1, "strict"});
  }
  write_results_csv(dir / "results.csv", rows);
  ASSERT_EQ(run_cli("eval --results " + q(dir / "results.csv") + " -o " + q(dir / "ev")), 0);
  const auto s = read_json(dir / "ev" / "summary.json");
  for (const auto& c : s["comparisons"]["shd_norm"]) EXPECT_DOUBLE_EQ(c["p_adjusted"].get<double>(), 1.0);
  std::string out;
  write(dir / "empty.csv", "method,dataset,seed,shd,shd_norm,sid,precision,recall,f1,runtime_s,f1_mode\n");
  EXPECT_EQ(run_cli("eval --results " + q(dir / "empty.csv") + " -o " + q(dir / "ev2"), &out), 2);
  fs::remove_all(dir);
}

TEST(Cli, ReportSummarisesRun) {
  const auto dir = scratch("report");
  write(dir / "truth.json", graph_to_json(oracle::example_one()).dump());
  ASSERT_EQ(run_cli("discover --oracle --truth " + q(dir / "truth.json") + " -o " + q(dir / "run")), 0);
  std::string out;
  ASSERT_EQ(run_cli("report --run " + q(dir / "run") + " -o " + q(dir / "rep"), &out), 0) << out;
  const auto md = slurp(dir / "rep" / "report.md");
  EXPECT_NE(md.find("ABAPC"), std::string::npos);
  EXPECT_NE(md.find("_||_"), std::string::npos);
  fs::remove_all(dir);
}

TEST(ResultsCsv, RoundTrip) {
  const auto dir = scratch("csv");
  std::vector<ResultRow> rows{{"ABAPC", "bench,1", 7, 3, 0.3, 2, 0.25, 1.0 / 3, 0.2857142857, 0.0123, "strict"}};
  write_results_csv(dir / "r.csv", rows);
  const auto back = read_results_csv(dir / "r.csv");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].dataset, "bench,1");
  EXPECT_EQ(back[0].seed, 7u);
  EXPECT_NEAR(back[0].recall, 1.0 / 3, 1e-9);
  EXPECT_EQ(back[0].f1_mode, "strict");
  fs::remove_all(dir);
}

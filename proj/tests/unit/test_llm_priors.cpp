// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <set>
#include <thread>

#include <httplib.h>

#include "argcd/llm.hpp"

using namespace argcd;
namespace fs = std::filesystem;

namespace {

const fs::path kLlm = fs::path(ARGCD_FIXTURES) / "llm";

using Pairs = std::set<std::pair<std::string, std::string>>;

std::vector<VariableMeta> load_variables(const std::string& bench) {
  std::ifstream in(kLlm / bench / "variables.json");
  const auto j = nlohmann::json::parse(in);
  std::vector<VariableMeta> out;
  for (const auto& v : j.at("variables")) out.push_back({v.at("name"), v.at("description")});
  return out;
}

std::vector<std::string> names_of(const std::vector<VariableMeta>& vars) {
  std::vector<std::string> out;
  for (const auto& v : vars) out.push_back(v.name);
  return out;
}

Dag load_truth(const std::string& bench, const std::vector<std::string>& names) {
  std::ifstream in(kLlm / bench / "truth.json");
  const auto j = nlohmann::json::parse(in);
  std::vector<NamedArrow> arrows;
  for (const auto& e : j.at("edges")) arrows.push_back({e[0], e[1], ""});
  return Dag(static_cast<int>(names.size()), arrows_to_edges(arrows, names));
}

Pairs pairs(const std::vector<NamedArrow>& arrows) {
  Pairs out;
  for (const auto& a : arrows) out.emplace(a.cause, a.effect);
  return out;
}

Pairs pairs(const nlohmann::json& j) {
  Pairs out;
  for (const auto& e : j) out.emplace(e[0], e[1]);
  return out;
}

BackendConfig fixture_backend() {
  BackendConfig cfg;
  cfg.fixture_dir = kLlm / "responses";
  return cfg;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("argcd_llm_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const std::vector<std::string> kBenches{"smoking", "sprinkler", "economy"};

}  // namespace

TEST(Prompt, ListsEveryVariableOnce) {
  const auto vars = load_variables("smoking");
  const auto p = build_elicitation_prompt(vars);
  for (const auto& v : vars) {
    EXPECT_NE(p.find("- " + v.name + ": " + v.description), std::string::npos);
    EXPECT_EQ(p.find("- " + v.name + ":"), p.rfind("- " + v.name + ":"));
  }
  EXPECT_NE(p.find("Required Directions"), std::string::npos);
  EXPECT_NE(p.find("Forbidden Directions"), std::string::npos);
  EXPECT_EQ(p.find("{{"), std::string::npos);
}

TEST(Prompt, NeedsTwoVariablesAndThePlaceholder) {
  EXPECT_THROW(build_elicitation_prompt({{"a", ""}}), std::invalid_argument);
  EXPECT_THROW(build_elicitation_prompt({{"a", ""}, {"b", ""}}, "no placeholder"), std::invalid_argument);
  EXPECT_EQ(build_elicitation_prompt({{"a", ""}, {"b", "B"}}, "V:\n{{variables}}"), "V:\n- a\n- b: B");
}

TEST(Prompt, RenderTemplateRejectsUnknownKeys) {
  EXPECT_EQ(render_template("{{x}}-{{y}}", {{"x", "1"}, {"y", "2"}}), "1-2");
  EXPECT_THROW(render_template("{{z}}", {{"x", "1"}}), std::invalid_argument);
}

TEST(Prompt, HashIsStableAndHex) {
  const auto h = prompt_hash("abc");
  EXPECT_EQ(h.size(), 16u);
  EXPECT_EQ(h, prompt_hash("abc"));
  EXPECT_NE(h, prompt_hash("abd"));
  // FNV-1a 64 of "a".
  EXPECT_EQ(prompt_hash("a"), "af63dc4c8601ec8c");
}

TEST(Backend, ValidationRules) {
  BackendConfig cfg;
  EXPECT_THROW(validate_backend(cfg), BackendError);
  cfg.fixture_dir = "/nonexistent/argcd";
  EXPECT_THROW(validate_backend(cfg), BackendError);
  cfg = fixture_backend();
  EXPECT_NO_THROW(validate_backend(cfg));

  cfg.mode = BackendMode::live;
  EXPECT_THROW(validate_backend(cfg), BackendError);
  cfg.endpoint = "http://127.0.0.1:1/v1/chat/completions";
  cfg.model = "m";
  cfg.api_key_env = "ARGCD_TEST_UNSET_KEY";
  ::unsetenv("ARGCD_TEST_UNSET_KEY");
  try {
    validate_backend(cfg);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_NE(std::string(e.what()).find("ARGCD_TEST_UNSET_KEY"), std::string::npos);
  }
  EXPECT_THROW(backend_mode_from("offline"), BackendError);
}

TEST(Backend, FixtureReturnsStoredTextsInOrder) {
  const auto prompt = build_elicitation_prompt(load_variables("smoking"));
  const auto cfg = fixture_backend();
  const auto texts = query_backend(prompt, 5, cfg);
  ASSERT_EQ(texts.size(), 5u);
  for (int i = 1; i <= 5; ++i) {
    std::ifstream in(fixture_path(cfg, prompt, i));
    std::string want((std::istreambuf_iterator<char>(in)), {});
    EXPECT_EQ(texts[i - 1], want);
  }
  EXPECT_EQ(query_backend(prompt, 5, cfg), texts);
}

TEST(Backend, MissingFixtureNamesThePath) {
  const auto cfg = fixture_backend();
  const auto prompt = build_elicitation_prompt(load_variables("smoking"));
  try {
    query_backend(prompt, 8, cfg);
    FAIL();
  } catch (const BackendError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("fixture missing"), std::string::npos);
    EXPECT_NE(msg.find(fixture_path(cfg, prompt, 8).string()), std::string::npos);
  }
  EXPECT_THROW(query_backend(prompt, 0, cfg), std::invalid_argument);
}

TEST(Parser, ForbiddenLineWithDashJustification) {
  const auto s = parse_constraints("Forbidden Directions:\n1. cancer -> smoking \xe2\x80\x94 reverse causation implausible",
                                   {"smoking", "cancer"});
  ASSERT_EQ(s.forbidden.size(), 1u);
  EXPECT_EQ(s.forbidden[0].cause, "cancer");
  EXPECT_EQ(s.forbidden[0].effect, "smoking");
  EXPECT_EQ(s.forbidden[0].justification, "reverse causation implausible");
  EXPECT_TRUE(s.required.empty());
}

TEST(Parser, NoHeaderGivesEmptySetWithWarning) {
  const auto s = parse_constraints("smoking -> cancer", {"smoking", "cancer"});
  EXPECT_TRUE(s.required.empty());
  EXPECT_TRUE(s.forbidden.empty());
  ASSERT_EQ(s.warnings.size(), 1u);
}

TEST(Parser, LongestNameWins) {
  const auto s = parse_constraints("Required Directions:\nlung cancer risk -> lung cancer",
                                   {"lung", "lung_cancer", "lung_cancer_risk"});
  ASSERT_EQ(s.required.size(), 1u);
  EXPECT_EQ(s.required[0].cause, "lung_cancer_risk");
  EXPECT_EQ(s.required[0].effect, "lung_cancer");
}

TEST(Parser, UnknownNamesAreSkippedAndLogged) {
  const auto s = parse_constraints("Required Directions:\na -> zeta\na -> b", {"a", "b"});
  EXPECT_EQ(pairs(s.required), (Pairs{{"a", "b"}}));
  ASSERT_EQ(s.warnings.size(), 1u);
  EXPECT_NE(s.warnings[0].find("line 2"), std::string::npos);
}

TEST(Parser, SelfPairsAndDuplicatesCollapse) {
  const auto s = parse_constraints("Required Directions:\na -> a -> b\na -> b: again", {"a", "b"});
  ASSERT_EQ(s.required.size(), 1u);
  EXPECT_EQ(s.required[0].cause, "a");
}

TEST(Parser, HandLabelledCorpus) {
  int variants = 0;
  for (const auto& bench : kBenches) {
    const auto vars = load_variables(bench);
    const auto names = names_of(vars);
    const auto prompt = build_elicitation_prompt(vars);
    std::ifstream in(kLlm / bench / "labels.json");
    const auto labels = nlohmann::json::parse(in).at("responses");
    const auto texts = query_backend(prompt, static_cast<int>(labels.size()), fixture_backend());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto s = parse_constraints(texts[i], names);
      EXPECT_EQ(pairs(s.required), pairs(labels[i].at("required"))) << bench << " response " << i + 1;
      EXPECT_EQ(pairs(s.forbidden), pairs(labels[i].at("forbidden"))) << bench << " response " << i + 1;
      ++variants;
    }
  }
  EXPECT_GE(variants, 20);
}

TEST(Parser, DeterministicOutput) {
  const auto vars = load_variables("economy");
  const auto texts = query_backend(build_elicitation_prompt(vars), 7, fixture_backend());
  for (const auto& t : texts) {
    EXPECT_EQ(constraint_set_to_json(parse_constraints(t, names_of(vars))).dump(),
              constraint_set_to_json(parse_constraints(t, names_of(vars))).dump());
  }
}

TEST(Consensus, IntersectionAndConflictRemoval) {
  ConstraintSet a, b;
  a.required = {{"x", "y", "first"}, {"y", "z", ""}};
  a.forbidden = {{"x", "y", ""}, {"z", "x", ""}};
  b.required = {{"x", "y", "second"}};
  b.forbidden = {{"x", "y", ""}, {"z", "x", ""}};
  const auto c = consensus({a, b});
  EXPECT_TRUE(c.required.empty());
  EXPECT_EQ(pairs(c.forbidden), (Pairs{{"z", "x"}}));
  EXPECT_EQ(c.warnings.size(), 1u);
  EXPECT_THROW(consensus({}), std::invalid_argument);
}

TEST(Consensus, SingleRunIsIdentityAndJustificationsComeFromFirst) {
  ConstraintSet a, b;
  a.required = {{"y", "z", "r1"}, {"x", "y", "r2"}};
  b.required = {{"x", "y", "other"}, {"y", "z", "other"}};
  const auto one = consensus({a});
  EXPECT_EQ(pairs(one.required), pairs(a.required));
  const auto two = consensus({a, b});
  ASSERT_EQ(two.required.size(), 2u);
  EXPECT_EQ(two.required[0].cause, "x");
  EXPECT_EQ(two.required[0].justification, "r2");
}

TEST(Consensus, SubsetOfEveryRunOnCorpus) {
  for (const auto& bench : kBenches) {
    const auto vars = load_variables(bench);
    const auto names = names_of(vars);
    std::vector<ConstraintSet> runs;
    for (const auto& t : query_backend(build_elicitation_prompt(vars), 5, fixture_backend())) {
      runs.push_back(parse_constraints(t, names));
    }
    const auto c = consensus(runs);
    for (const auto& r : runs) {
      for (const auto& p : pairs(c.required)) EXPECT_TRUE(pairs(r.required).count(p));
      for (const auto& p : pairs(c.forbidden)) EXPECT_TRUE(pairs(r.forbidden).count(p));
    }
    const auto truth = load_truth(bench, names);
    const double cp = constraint_precision(c, truth, names);
    for (const auto& r : runs) EXPECT_GE(cp, constraint_precision(r, truth, names)) << bench;
    EXPECT_FALSE(c.required.empty()) << bench;
  }
}

TEST(Consensus, PrecisionCounts) {
  const Dag truth(3, {{0, 1}});
  ConstraintSet s;
  EXPECT_DOUBLE_EQ(constraint_precision(s, truth, {"a", "b", "c"}), 1.0);
  s.required = {{"a", "b", ""}, {"b", "c", ""}};
  s.forbidden = {{"b", "a", ""}, {"a", "b", ""}};
  EXPECT_DOUBLE_EQ(constraint_precision(s, truth, {"a", "b", "c"}), 0.5);
}

TEST(ConstraintJson, RoundTripAndNames) {
  ConstraintSet s;
  s.required = {{"a", "b", "why"}};
  s.forbidden = {{"b", "a", ""}};
  const auto j = constraint_set_to_json(s);
  EXPECT_EQ(j.at("required")[0], nlohmann::json({"a", "b", "why"}));
  const auto back = constraint_set_from_json(j);
  EXPECT_EQ(constraint_set_to_json(back), j);
  EXPECT_EQ(arrows_to_edges(back.required, {"a", "b"}), (std::vector<Edge>{{0, 1}}));
  EXPECT_THROW(arrows_to_edges(back.required, {"a", "c"}), std::invalid_argument);
  EXPECT_THROW(constraint_set_from_json(nlohmann::json::parse(R"({"required": [["a"]]})")), std::invalid_argument);
}

TEST(Descriptions, LexicalGuard) {
  const std::vector<std::string> names{"smoking", "cancer", "tar"};
  EXPECT_TRUE(description_leaks_structure("Habit that causes cancer", "smoking", names));
  EXPECT_TRUE(description_leaks_structure("Often leads to tar buildup", "smoking", names));
  EXPECT_FALSE(description_leaks_structure("Daily tobacco use", "smoking", names));
  EXPECT_FALSE(description_leaks_structure("Smoking that causes harm", "smoking", names));
  EXPECT_FALSE(description_leaks_structure("Associated with cancer", "smoking", names));
}

TEST(Descriptions, FixtureRunReturnsStoredTexts) {
  const auto dir = scratch("desc");
  BackendConfig cfg;
  cfg.fixture_dir = dir;
  const Dag truth(5, {{0, 1}, {1, 2}, {0, 3}, {4, 2}});
  std::vector<VariableMeta> vars{{"smoking", ""}, {"tar", ""}, {"cancer", ""}, {"yellow_fingers", ""}, {"genetics", ""}};
  fs::path want;
  try {
    generate_descriptions(truth, vars, cfg);
    FAIL();
  } catch (const BackendError& e) {
    const std::string msg = e.what();
    const auto at = msg.find(dir.string());
    ASSERT_NE(at, std::string::npos);
    want = msg.substr(at);
  }
  fs::create_directories(want.parent_path());
  std::ofstream(want) << "- smoking: Daily tobacco use\n- **tar**: Residue in the airways\n"
                         "cancer: A lung tumour\nyellow_fingers: Stained fingertips\ngenetics: Inherited variant\n";
  const auto got = generate_descriptions(truth, vars, cfg);
  EXPECT_EQ(got, (std::vector<std::string>{"Daily tobacco use", "Residue in the airways", "A lung tumour",
                                           "Stained fingertips", "Inherited variant"}));
  std::ofstream(want) << "smoking: Habit that causes cancer\ntar: r\ncancer: c\nyellow_fingers: y\ngenetics: g\n";
  EXPECT_THROW(generate_descriptions(truth, vars, cfg), BackendError);
  std::ofstream(want) << "smoking: s\ntar: t\n";
  EXPECT_THROW(generate_descriptions(truth, vars, cfg), BackendError);
  fs::remove_all(dir);
}

namespace {

// Minimal chat-completions server on a loopback port.
class MockChat {
 public:
  explicit MockChat(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat/completions", handler);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockChat() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

BackendConfig live_backend(const std::string& url) {
  BackendConfig cfg;
  cfg.mode = BackendMode::live;
  cfg.endpoint = url;
  cfg.model = "mock-model";
  cfg.api_key_env = "ARGCD_TEST_LIVE_KEY";
  cfg.http.timeout_s = 5;
  cfg.http.retries = 2;
  cfg.http.backoff_s = 0.01;
  ::setenv("ARGCD_TEST_LIVE_KEY", "secret-token", 1);
  return cfg;
}

}  // namespace

TEST(Live, SendsBearerAndPromptAndReturnsContent) {
  std::atomic<int> calls{0};
  MockChat mock([&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    const auto body = nlohmann::json::parse(req.body);
    const bool ok = req.get_header_value("Authorization") == "Bearer secret-token" &&
                    body.at("model") == "mock-model" && body.at("messages")[0].at("content") == "hello";
    nlohmann::json reply = {{"choices", {{{"message", {{"content", ok ? "fine" : "bad request"}}}}}}};
    res.set_content(reply.dump(), "application/json");
  });
  const auto texts = query_backend("hello", 3, live_backend(mock.url()));
  EXPECT_EQ(texts, (std::vector<std::string>{"fine", "fine", "fine"}));
  EXPECT_EQ(calls.load(), 3);
}

TEST(Live, RetriesServerErrors) {
  std::atomic<int> calls{0};
  MockChat mock([&](const httplib::Request&, httplib::Response& res) {
    if (calls++ == 0) {
      res.status = 503;
      return;
    }
    res.set_content(R"({"choices":[{"message":{"content":"late"}}]})", "application/json");
  });
  EXPECT_EQ(query_backend("p", 1, live_backend(mock.url())), (std::vector<std::string>{"late"}));
  EXPECT_EQ(calls.load(), 2);
}

TEST(Live, PartialResultsSurviveFailures) {
  std::atomic<int> calls{0};
  MockChat mock([&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.set_content(R"({"unexpected": true})", "application/json");
  });
  auto cfg = live_backend(mock.url());
  try {
    query_backend("p", 2, cfg);
    FAIL();
  } catch (const BackendRunError& e) {
    EXPECT_EQ(e.partial().size(), 2u);
    EXPECT_FALSE(e.partial()[0].has_value());
  }
}

TEST(Live, ExtractorOutputIsValidated) {
  MockChat mock([&](const httplib::Request&, httplib::Response& res) {
    const std::string content =
        "Sure:\n{\"required\": [[\"Smoking\", \"lung-cancer\", \"why\"], [\"smoking\", \"asbestos\"]], "
        "\"forbidden\": [[\"lung cancer\", \"smoking\"], \"junk\"]}";
    res.set_content(nlohmann::json({{"choices", {{{"message", {{"content", content}}}}}}}).dump(), "application/json");
  });
  const auto s = extract_constraints("anything", {"smoking", "lung_cancer"}, live_backend(mock.url()));
  EXPECT_EQ(pairs(s.required), (Pairs{{"smoking", "lung_cancer"}}));
  EXPECT_EQ(s.required[0].justification, "why");
  EXPECT_EQ(pairs(s.forbidden), (Pairs{{"lung_cancer", "smoking"}}));
  EXPECT_EQ(s.warnings.size(), 2u);
}

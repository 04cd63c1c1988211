// SPDX-License-Identifier: Apache-2.0

#include "argcd/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "argcd/benchmark.hpp"
#include "argcd/ci.hpp"
#include "argcd/dataset.hpp"
#include "argcd/embedding.hpp"
#include "argcd/graph_io.hpp"
#include "argcd/knowledge_graph.hpp"
#include "argcd/llm.hpp"
#include "argcd/metrics.hpp"
#include "argcd/skeleton.hpp"
#include "argcd/solver.hpp"
#include "argcd/synth.hpp"
#include "argcd/version.hpp"

namespace argcd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json backend_defaults() {
  return {{"mode", "fixture"},       {"fixture_dir", ""},           {"endpoint", ""},
          {"model", ""},             {"temperature", 0.7},          {"api_key_env", "ARGCD_LLM_API_KEY"},
          {"timeout_s", 60.0},       {"retries", 3}};
}

json merged(json base, const json& extra) {
  for (auto it = extra.begin(); it != extra.end(); ++it) base[it.key()] = it.value();
  return base;
}

// Keys whose default is null accept an object (a nested backend block) or null.
const std::set<std::string>& nullable_blocks() {
  static const std::set<std::string> keys = {"llm", "extractor", "descriptions"};
  return keys;
}

bool same_kind(const json& def, const json& v) {
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number()) return v.is_number();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) return v.is_array();
  if (def.is_object()) return v.is_object();
  return true;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RunError("cannot write '" + path.string() + "'");
  out << text;
}

void write_json_file(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RunError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path require_output(const json& cfg) {
  const auto out = cfg.at("output").get<std::string>();
  if (out.empty()) throw ConfigError("\"output\" directory is required");
  fs::create_directories(out);
  return out;
}

BackendConfig backend_from(const json& j) {
  BackendConfig b;
  try {
    b.mode = backend_mode_from(j.at("mode").get<std::string>());
  } catch (const BackendError& e) {
    throw ConfigError(e.what());
  }
  b.fixture_dir = j.at("fixture_dir").get<std::string>();
  b.endpoint = j.at("endpoint").get<std::string>();
  b.model = j.at("model").get<std::string>();
  b.temperature = j.at("temperature").get<double>();
  b.api_key_env = j.at("api_key_env").get<std::string>();
  b.http.timeout_s = j.at("timeout_s").get<double>();
  b.http.retries = j.at("retries").get<int>();
  try {
    validate_backend(b);
  } catch (const BackendError& e) {
    throw ConfigError(e.what());
  }
  return b;
}

std::vector<VariableMeta> read_variables_file(const fs::path& path) {
  json j;
  try {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open variables file '" + path.string() + "'");
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("variables file '" + path.string() + "': " + e.what());
  }
  if (j.is_object() && j.contains("variables")) j = j.at("variables");
  if (!j.is_array()) throw ConfigError("variables file must hold an array");
  std::vector<VariableMeta> out;
  for (const auto& v : j) {
    if (v.is_string()) out.push_back({v.get<std::string>(), ""});
    else out.push_back({v.at("name").get<std::string>(), v.value("description", "")});
  }
  return out;
}

std::vector<std::string> names_of(const std::vector<VariableMeta>& vars) {
  std::vector<std::string> out;
  for (const auto& v : vars) out.push_back(v.name);
  return out;
}

/// Elicitation shared by `elicit` and `discover`: writes prompt, raw replies,
/// per-run parses and the consensus into `dir`.
ConstraintSet run_elicitation(const std::vector<VariableMeta>& vars, const json& cfg, const fs::path& dir,
                              std::ostream& log) {
  const int k = cfg.at("k").get<int>();
  if (k < 1) throw ConfigError("\"k\" must be at least 1");
  const auto backend = backend_from(cfg);
  std::string tmpl = default_elicitation_template();
  if (const auto path = cfg.at("prompt_template").get<std::string>(); !path.empty()) tmpl = read_text(path);
  std::string prompt;
  try {
    prompt = build_elicitation_prompt(vars, tmpl);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  fs::create_directories(dir / "responses");
  write_text(dir / "prompt_template.txt", tmpl);
  write_text(dir / "prompt.txt", prompt);
  log << "elicit: " << k << " queries (" << to_string(backend.mode) << ", prompt " << prompt_hash(prompt) << ")\n";

  std::vector<std::string> replies;
  try {
    replies = query_backend(prompt, k, backend);
  } catch (const BackendRunError& e) {
    for (std::size_t i = 0; i < e.partial().size(); ++i) {
      if (e.partial()[i]) write_text(dir / "responses" / ("response_" + std::to_string(i + 1) + ".txt"), *e.partial()[i]);
    }
    throw RunError(e.what());
  } catch (const BackendError& e) {
    throw RunError(e.what());
  }

  std::optional<BackendConfig> extractor;
  if (cfg.contains("extractor") && cfg.at("extractor").is_object()) {
    extractor = backend_from(merged(backend_defaults(), cfg.at("extractor")));
  }
  const auto names = names_of(vars);
  std::vector<ConstraintSet> runs;
  for (int i = 0; i < k; ++i) {
    write_text(dir / "responses" / ("response_" + std::to_string(i + 1) + ".txt"), replies[i]);
    ConstraintSet parsed;
    try {
      parsed = extractor ? extract_constraints(replies[i], names, *extractor) : parse_constraints(replies[i], names);
    } catch (const BackendError& e) {
      throw RunError(e.what());
    }
    parsed.source = "run " + std::to_string(i + 1);
    for (const auto& w : parsed.warnings) log << "  run " << i + 1 << ": " << w << '\n';
    write_json_file(dir / "responses" / ("parsed_" + std::to_string(i + 1) + ".json"), constraint_set_to_json(parsed));
    runs.push_back(std::move(parsed));
  }
  auto agreed = consensus(runs);
  for (const auto& w : agreed.warnings) log << "  consensus: " << w << '\n';
  write_json_file(dir / "constraints.json", constraint_set_to_json(agreed));
  log << "elicit: consensus keeps " << agreed.required.size() << " required and " << agreed.forbidden.size()
      << " forbidden arrows\n";
  return agreed;
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(10) << v;
  return ss.str();
}

}  // namespace

json default_config(const std::string& command) {
  if (command == "discover") {
    return {{"data", ""},          {"sidecar", ""},
            {"bundle", ""},        {"truth", ""},
            {"variables", ""},     {"oracle", false},
            {"constraints", ""},   {"llm", nullptr},
            {"alpha", 0.05},       {"max_cond_size", -1},
            {"min_samples_per_dof", 0},
            {"reduce", "skeleton"}, {"tau_hard", 1.0},
            {"solver_mode", "relaxation"},
            {"time_budget_s", 300.0}, {"max_demotions", -1},
            {"reps", 50},          {"samples", 5000},
            {"seed", 0},           {"workers", 0},
            {"baselines", true},   {"output", ""}};
  }
  if (command == "elicit") {
    return merged(backend_defaults(), {{"variables", ""},
                                       {"data", ""},
                                       {"sidecar", ""},
                                       {"k", 5},
                                       {"prompt_template", ""},
                                       {"extractor", nullptr},
                                       {"output", ""}});
  }
  if (command == "genbench") {
    return {{"kg", ""},
            {"kg_format", "tsv"},
            {"kinds", {"lower_triangular"}},
            {"nodes", {5}},
            {"density", 0.5},
            {"seeds", {0}},
            {"weights", {1.0, 1.0, 1.0}},
            {"cap", 10000},
            {"samples", 5000},
            {"cardinality_range", {2, 4}},
            {"embedding", "offline"},
            {"embedding_dim", 64},
            {"embedding_table", ""},
            {"embedding_url", ""},
            {"embedding_model", ""},
            {"embedding_api_key_env", "ARGCD_EMBEDDING_API_KEY"},
            {"embedding_cache", ""},
            {"descriptions", nullptr},
            {"output", ""}};
  }
  if (command == "eval") {
    return {{"results", json::array()}, {"metrics", {"shd_norm", "f1"}}, {"alpha_fdr", 0.05}, {"output", ""}};
  }
  if (command == "report") {
    return {{"run", ""}, {"output", ""}};
  }
  throw ConfigError("unknown command '" + command + "'");
}

json resolve_config(const std::string& command, const json& overrides) {
  json cfg = default_config(command);
  if (overrides.is_null()) return cfg;
  if (!overrides.is_object()) throw ConfigError("configuration must be a JSON object");
  for (auto it = overrides.begin(); it != overrides.end(); ++it) {
    if (!cfg.contains(it.key())) throw ConfigError("unknown configuration key \"" + it.key() + "\" for " + command);
    const json& def = cfg.at(it.key());
    if (def.is_null()) {
      if (!nullable_blocks().count(it.key()) || !(it.value().is_object() || it.value().is_null())) {
        throw ConfigError("\"" + it.key() + "\" must be an object or null");
      }
      if (it.value().is_object()) {
        const json block_defaults =
            it.key() == "llm" ? default_config("elicit") : backend_defaults();
        for (auto b = it.value().begin(); b != it.value().end(); ++b) {
          if (!block_defaults.contains(b.key())) {
            throw ConfigError("unknown key \"" + b.key() + "\" in \"" + it.key() + "\"");
          }
          if (!same_kind(block_defaults.at(b.key()), b.value())) {
            throw ConfigError("\"" + it.key() + "." + b.key() + "\" has the wrong type");
          }
        }
        cfg[it.key()] = merged(block_defaults, it.value());
      }
      continue;
    }
    if (!same_kind(def, it.value())) throw ConfigError("\"" + it.key() + "\" has the wrong type");
    cfg[it.key()] = it.value();
  }
  return cfg;
}

json read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  try {
    auto j = json::parse(in);
    if (!j.is_object()) throw ConfigError("config file '" + path.string() + "' must hold a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path.string() + "': " + e.what());
  }
}

// ---------------------------------------------------------------- results CSV

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + '"';
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch != '"') {
        out.back() += ch;
      } else if (i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else {
        quoted = false;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.emplace_back();
    } else if (ch != '\r') {
      out.back() += ch;
    }
  }
  return out;
}

}  // namespace

void write_results_csv(const fs::path& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path);
  if (!out) throw RunError("cannot write '" + path.string() + "'");
  out << "method,dataset,seed,shd,shd_norm,sid,precision,recall,f1,runtime_s,f1_mode\n";
  for (const auto& r : rows) {
    out << csv_field(r.method) << ',' << csv_field(r.dataset) << ',' << r.seed << ',' << r.shd << ',' << fmt(r.shd_norm) << ','
        << r.sid << ',' << fmt(r.precision) << ',' << fmt(r.recall) << ',' << fmt(r.f1) << ','
        << fmt(r.runtime_s) << ',' << csv_field(r.f1_mode) << '\n';
  }
}

std::vector<ResultRow> read_results_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw RunError("cannot read results '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  std::vector<ResultRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = csv_split(line);
    if (f.size() < 10) throw RunError(path.string() + ":" + std::to_string(lineno) + ": expected at least 10 fields");
    try {
      ResultRow r;
      r.method = f[0];
      r.dataset = f[1];
      r.seed = std::stoull(f[2]);
      r.shd = std::stoi(f[3]);
      r.shd_norm = std::stod(f[4]);
      r.sid = std::stoll(f[5]);
      r.precision = std::stod(f[6]);
      r.recall = std::stod(f[7]);
      r.f1 = std::stod(f[8]);
      r.runtime_s = std::stod(f[9]);
      if (f.size() > 10) r.f1_mode = f[10];
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw RunError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return rows;
}

// ---------------------------------------------------------------- discover

namespace {

struct DiscoverSource {
  std::vector<VariableMeta> variables;
  std::optional<Dag> truth;
  std::optional<BayesNet> bn;
  std::optional<Dataset> data;
  std::string dataset_label;
};

DiscoverSource load_source(const json& cfg) {
  DiscoverSource src;
  const auto bundle = cfg.at("bundle").get<std::string>();
  const auto data = cfg.at("data").get<std::string>();
  const auto truth = cfg.at("truth").get<std::string>();
  const bool oracle = cfg.at("oracle").get<bool>();
  if (!bundle.empty() + !data.empty() != 1 && !oracle) {
    throw ConfigError("give exactly one of \"data\" or \"bundle\" (or \"oracle\" with \"truth\")");
  }
  try {
    if (!bundle.empty()) {
      auto b = read_bundle(bundle);
      src.variables = b.variables;
      src.truth = b.dag;
      src.bn = b.bn;
      src.data = b.data;
      src.dataset_label = fs::path(bundle).filename().string();
    } else if (!data.empty()) {
      const auto sidecar = cfg.at("sidecar").get<std::string>();
      src.data = read_dataset_csv(data, sidecar.empty() ? std::nullopt : std::optional<fs::path>(sidecar));
      src.variables = src.data->variables();
      src.dataset_label = fs::path(data).stem().string();
    }
    if (!truth.empty()) src.truth = read_dag(truth);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  if (oracle) {
    if (!src.truth) throw ConfigError("\"oracle\" needs a true graph (\"truth\" or \"bundle\")");
    if (src.variables.empty()) {
      const auto vars = cfg.at("variables").get<std::string>();
      if (!vars.empty()) {
        src.variables = read_variables_file(vars);
      } else {
        for (int v = 0; v < src.truth->size(); ++v) src.variables.push_back({"X" + std::to_string(v), ""});
      }
    }
    if (src.dataset_label.empty()) src.dataset_label = fs::path(truth).stem().string();
  }
  if (src.truth && src.truth->size() != static_cast<int>(src.variables.size())) {
    throw ConfigError("true graph has " + std::to_string(src.truth->size()) + " nodes but there are " +
                      std::to_string(src.variables.size()) + " variables");
  }
  return src;
}

struct RepOutcome {
  std::vector<ResultRow> rows;
  std::string error;
  json info;
};

ResultRow score(const std::string& method, const std::string& dataset, std::uint64_t seed, const Pdag& est,
                const Dag& truth, F1Mode mode, double runtime, const Dag* est_dag) {
  ResultRow r;
  r.method = method;
  r.dataset = dataset;
  r.seed = seed;
  r.shd = shd(est, truth);
  r.shd_norm = shd_normalized(est, truth);
  r.sid = est_dag ? sid(*est_dag, truth) : -1;
  const auto pr = precision_recall_f1(est, truth, mode);
  r.precision = pr.precision;
  r.recall = pr.recall;
  r.f1 = pr.f1;
  r.runtime_s = runtime;
  r.f1_mode = to_string(mode);
  return r;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

CommandResult cmd_discover(const json& cfg, std::ostream& log) {
  CommandResult result;
  const auto src = load_source(cfg);
  const auto out = require_output(cfg);
  result.output_dir = out;
  write_json_file(out / "config.resolved.json", cfg);

  const double alpha = cfg.at("alpha").get<double>();
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("\"alpha\" must lie in (0, 1)");
  const std::string reduce = cfg.at("reduce").get<std::string>();
  if (reduce != "skeleton" && reduce != "tau") throw ConfigError("\"reduce\" must be \"skeleton\" or \"tau\"");
  SolverConfig solver_cfg;
  try {
    solver_cfg.mode = solver_mode_from(cfg.at("solver_mode").get<std::string>());
  } catch (const SolverError& e) {
    throw ConfigError(e.what());
  }
  solver_cfg.time_budget_s = cfg.at("time_budget_s").get<double>();
  solver_cfg.max_demotions = cfg.at("max_demotions").get<int>();
  const int max_cond = cfg.at("max_cond_size").get<int>();
  const double tau = cfg.at("tau_hard").get<double>();
  const bool oracle = cfg.at("oracle").get<bool>();
  const bool resample = src.bn.has_value() && !oracle;
  const int reps = resample ? cfg.at("reps").get<int>() : 1;
  if (reps < 1) throw ConfigError("\"reps\" must be at least 1");
  const auto samples = cfg.at("samples").get<std::size_t>();
  const auto seed = cfg.at("seed").get<std::uint64_t>();
  CiOptions ci_opts;
  ci_opts.alpha = alpha;
  ci_opts.min_samples_per_dof = cfg.at("min_samples_per_dof").get<int>();
  const auto names = names_of(src.variables);
  const int n = static_cast<int>(names.size());

  // Semantic constraints: a pre-parsed file, or a fresh elicitation.
  std::optional<ConstraintSet> constraints;
  if (const auto path = cfg.at("constraints").get<std::string>(); !path.empty()) {
    try {
      constraints = read_constraint_set(path);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  } else if (cfg.at("llm").is_object()) {
    constraints = run_elicitation(src.variables, cfg.at("llm"), out / "elicitation", log);
  }
  std::vector<Edge> required, forbidden;
  if (constraints) {
    try {
      required = arrows_to_edges(constraints->required, names);
      forbidden = arrows_to_edges(constraints->forbidden, names);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    write_json_file(out / "constraints.used.json", constraint_set_to_json(*constraints));
  }

  json run_info = {{"tool_version", kVersion}, {"variables", names}, {"reps", reps}, {"seed", seed}};
  if (cfg.at("llm").is_object()) run_info["prompt_template"] = "elicitation/prompt_template.txt";

  std::vector<RepOutcome> outcomes(reps);
  std::mutex log_mutex;
  auto run_rep = [&](int rep) {
    RepOutcome& o = outcomes[rep];
    const std::uint64_t rep_seed = resample ? derive_seed(seed, "rep" + std::to_string(rep)) : seed;
    const fs::path dir = out / (reps == 1 ? std::string("run") : "rep_" + [&] {
      std::ostringstream ss;
      ss << std::setw(3) << std::setfill('0') << rep;
      return ss.str();
    }());
    try {
      fs::create_directories(dir);
      std::unique_ptr<CiTester> tester;
      std::optional<Dataset> data;
      if (oracle) {
        tester = std::make_unique<OracleCiTester>(*src.truth, alpha);
      } else {
        data = resample ? forward_sample(*src.bn, samples, rep_seed, src.variables) : *src.data;
        tester = std::make_unique<DataCiTester>(*data, ci_opts);
      }
      const auto t0 = std::chrono::steady_clock::now();
      auto mpc = mpc_cpdag(*tester, max_cond);
      const double t_mpc = seconds_since(t0);
      write_fact_ledger(dir / "facts.jsonl", mpc.skeleton.facts, alpha);
      json mpc_json = graph_to_json(mpc.cpdag);
      mpc_json["ambiguous_triples"] = json::array();
      for (const auto& t : mpc.oriented.ambiguous) mpc_json["ambiguous_triples"].push_back({t.x, t.middle, t.y});
      mpc_json["collider_conflicts"] = json::array();
      for (auto [u, v] : mpc.oriented.conflicts) mpc_json["collider_conflicts"].push_back({u, v});
      mpc_json["meek_conflicts"] = json::array();
      for (auto [u, v] : mpc.meek_conflicts) mpc_json["meek_conflicts"].push_back({u, v});
      write_json_file(dir / "mpc_cpdag.json", mpc_json);

      const Reduction reduction = reduce == "skeleton" ? reduce_to_skeleton(mpc.skeleton.skeleton)
                                                       : reduce_skeleton(mpc.skeleton.facts, n, tau);
      auto solve_with = [&](const std::string& label, const std::vector<Edge>& req, const std::vector<Edge>& forb) {
        const auto t1 = std::chrono::steady_clock::now();
        auto sem = apply_semantic_constraints(reduction, req, forb);
        auto input = make_solver_input(n, mpc.skeleton.facts, reduction, sem, solver_cfg);
        auto sol = solve(input);
        const double t_solve = seconds_since(t1) + t_mpc;
        std::string stem = label == "ABAPC" ? "abapc" : "abapc_llm";
        json sj = solution_to_json(sol, names);
        sj["warnings"] = sem.warnings;
        sj["vacuous_forbidden"] = json::array();
        for (auto [u, v] : sem.vacuous_forbidden) sj["vacuous_forbidden"].push_back({u, v});
        write_json_file(dir / ("solution_" + stem + ".json"), sj);
        write_text(dir / ("trace_" + stem + ".txt"), render_trace(sol, names));
        if (!sol.complete) {
          std::lock_guard lock(log_mutex);
          log << "warning: " << dir.filename().string() << " " << label << " hit the time budget; best-so-far DAG kept\n";
        }
        if (src.truth) {
          o.rows.push_back(score(label, src.dataset_label, rep_seed, Pdag::from_dag(sol.dag), *src.truth,
                                 F1Mode::strict, t_solve, &sol.dag));
        }
      };
      solve_with("ABAPC", {}, {});
      if (constraints) solve_with("ABAPC-LLM", required, forbidden);
      if (src.truth && cfg.at("baselines").get<bool>()) {
        o.rows.push_back(
            score("MPC", src.dataset_label, rep_seed, mpc.cpdag, *src.truth, F1Mode::cpdag_aware, t_mpc, nullptr));
        const auto t2 = std::chrono::steady_clock::now();
        const Dag rnd = random_baseline(n, edge_density(*src.truth), derive_seed(rep_seed, "random"));
        o.rows.push_back(score("Random", src.dataset_label, rep_seed, Pdag::from_dag(rnd), *src.truth,
                               F1Mode::strict, seconds_since(t2), &rnd));
      }
      o.info = {{"dir", dir.filename().string()}, {"seed", rep_seed}, {"facts", mpc.skeleton.facts.size()}};
    } catch (const std::exception& e) {
      o.error = dir.filename().string() + ": " + e.what();
    }
  };

  int workers = cfg.at("workers").get<int>();
  if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, reps);
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int rep = next++; rep < reps; rep = next++) run_rep(rep);
    });
  }
  for (auto& t : pool) t.join();

  std::vector<ResultRow> rows;
  run_info["runs"] = json::array();
  for (auto& o : outcomes) {
    rows.insert(rows.end(), o.rows.begin(), o.rows.end());
    if (!o.error.empty()) {
      result.failures.push_back(o.error);
      log << "error: " << o.error << '\n';
    } else {
      run_info["runs"].push_back(o.info);
    }
  }
  run_info["failures"] = result.failures;
  write_json_file(out / "run_info.json", run_info);
  if (src.truth) write_results_csv(out / "results.csv", rows);
  log << "discover: " << reps - result.failures.size() << "/" << reps << " runs written to " << out.string() << '\n';
  return result;
}

// ---------------------------------------------------------------- elicit

namespace {

std::vector<VariableMeta> elicit_variables(const json& cfg) {
  const auto vpath = cfg.at("variables").get<std::string>();
  const auto dpath = cfg.at("data").get<std::string>();
  if (!vpath.empty()) return read_variables_file(vpath);
  if (dpath.empty()) throw ConfigError("elicit needs \"variables\" or \"data\"");
  try {
    const auto sidecar = cfg.at("sidecar").get<std::string>();
    return read_dataset_csv(dpath, sidecar.empty() ? std::nullopt : std::optional<fs::path>(sidecar)).variables();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace

std::string elicitation_prompt(const json& cfg) {
  std::string tmpl = default_elicitation_template();
  if (const auto path = cfg.at("prompt_template").get<std::string>(); !path.empty()) tmpl = read_text(path);
  try {
    return build_elicitation_prompt(elicit_variables(cfg), tmpl);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

CommandResult cmd_elicit(const json& cfg, std::ostream& log) {
  const auto vars = elicit_variables(cfg);
  CommandResult result;
  result.output_dir = require_output(cfg);
  write_json_file(result.output_dir / "config.resolved.json", cfg);
  auto agreed = run_elicitation(vars, cfg, result.output_dir, log);
  result.warnings = agreed.warnings;
  return result;
}

// ---------------------------------------------------------------- genbench

namespace {

std::unique_ptr<EmbeddingProvider> make_embeddings(const json& cfg) {
  const auto kind = cfg.at("embedding").get<std::string>();
  if (kind == "offline") return std::make_unique<OfflineEmbedding>(cfg.at("embedding_dim").get<int>());
  if (kind == "table") {
    const auto path = cfg.at("embedding_table").get<std::string>();
    if (path.empty()) throw ConfigError("\"embedding_table\" is required for the table provider");
    return std::make_unique<TableEmbedding>(TableEmbedding::from_file(path));
  }
  if (kind == "http") {
    HttpEmbeddingConfig h;
    h.url = cfg.at("embedding_url").get<std::string>();
    h.model = cfg.at("embedding_model").get<std::string>();
    h.api_key_env = cfg.at("embedding_api_key_env").get<std::string>();
    h.cache_dir = cfg.at("embedding_cache").get<std::string>();
    if (h.url.empty() || h.model.empty()) throw ConfigError("http embeddings need \"embedding_url\" and \"embedding_model\"");
    return std::make_unique<HttpEmbedding>(h);
  }
  throw ConfigError("unknown embedding provider '" + kind + "' (offline, table or http)");
}

}  // namespace

CommandResult cmd_genbench(const json& cfg, std::ostream& log) {
  const auto kg_path = cfg.at("kg").get<std::string>();
  if (kg_path.empty()) throw ConfigError("genbench needs \"kg\"");
  KgLoadReport report;
  KnowledgeGraph kg;
  try {
    kg = load_knowledge_graph(kg_path, kg_format_from(cfg.at("kg_format").get<std::string>()), &report);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  for (const auto& w : report.warnings) log << "kg: " << w << '\n';
  log << "kg: " << kg.size() << " concepts, " << kg.num_edges() << " edges\n";

  const auto w = cfg.at("weights").get<std::vector<double>>();
  if (w.size() != 3) throw ConfigError("\"weights\" needs three values (compactness, specificity, correlation)");
  const auto card = cfg.at("cardinality_range").get<std::vector<int>>();
  if (card.size() != 2 || card[0] < 2 || card[1] < card[0]) throw ConfigError("\"cardinality_range\" must be [lo, hi] with 2 <= lo <= hi");
  const double density = cfg.at("density").get<double>();
  if (!(density > 0.0 && density <= 1.0)) throw ConfigError("\"density\" must lie in (0, 1]");
  std::vector<DagKind> kinds;
  try {
    for (const auto& k : cfg.at("kinds").get<std::vector<std::string>>()) kinds.push_back(dag_kind_from(k));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const auto nodes = cfg.at("nodes").get<std::vector<int>>();
  const auto seeds = cfg.at("seeds").get<std::vector<std::uint64_t>>();
  auto embeddings = make_embeddings(cfg);
  std::optional<BackendConfig> describer;
  if (cfg.at("descriptions").is_object()) describer = backend_from(cfg.at("descriptions"));

  CommandResult result;
  result.output_dir = require_output(cfg);
  write_json_file(result.output_dir / "config.resolved.json", cfg);
  SelectOptions opt;
  opt.weights = {w[0], w[1], w[2]};
  opt.cap = cfg.at("cap").get<std::size_t>();
  opt.samples = cfg.at("samples").get<std::size_t>();
  opt.cardinality_lo = card[0];
  opt.cardinality_hi = card[1];

  json index = json::array();
  for (DagKind kind : kinds) {
    for (int n : nodes) {
      for (auto s : seeds) {
        const std::string cell = std::string(to_string(kind)) + "_n" + std::to_string(n) + "_s" + std::to_string(s);
        json entry = {{"cell", cell}, {"kind", to_string(kind)}, {"nodes", n}, {"seed", s}};
        try {
          const Dag pattern = random_dag(kind, n, density, derive_seed(s, "pattern"));
          opt.seed = s;
          auto bench = select_benchmark(pattern, kg, *embeddings, opt);
          bench.provenance["scaffold"] = {{"kind", to_string(kind)}, {"nodes", n}, {"density", density}};
          if (describer) {
            const auto desc = generate_descriptions(bench.dag, bench.variables, *describer);
            for (std::size_t i = 0; i < desc.size(); ++i) bench.variables[i].description = desc[i];
            bench.data = Dataset(bench.variables, bench.data.cardinalities(),
                                 [&] {
                                   std::vector<std::vector<int>> cols;
                                   for (int v = 0; v < bench.data.num_vars(); ++v) {
                                     cols.emplace_back(bench.data.column(v).begin(), bench.data.column(v).end());
                                   }
                                   return cols;
                                 }(),
                                 bench.data.num_rows());
          }
          const auto dir = result.output_dir / cell;
          write_bundle(dir, bench);
          entry["status"] = "ok";
          entry["checksum"] = bundle_checksum(dir);
          entry["edges"] = bench.dag.num_edges();
          log << "genbench: " << cell << " grounded (" << bench.provenance.at("matches_scored") << " matches scored)\n";
        } catch (const std::exception& e) {
          entry["status"] = "failed";
          entry["error"] = e.what();
          result.failures.push_back(cell + ": " + e.what());
          log << "genbench: " << cell << " failed: " << e.what() << '\n';
        }
        index.push_back(entry);
      }
    }
  }
  write_json_file(result.output_dir / "index.json", index);
  return result;
}

// ---------------------------------------------------------------- eval

namespace {

double metric_of(const ResultRow& r, const std::string& m) {
  if (m == "shd") return r.shd;
  if (m == "shd_norm") return r.shd_norm;
  if (m == "sid") return static_cast<double>(r.sid);
  if (m == "precision") return r.precision;
  if (m == "recall") return r.recall;
  if (m == "f1") return r.f1;
  if (m == "runtime_s") return r.runtime_s;
  throw ConfigError("unknown metric '" + m + "'");
}

const std::vector<std::string>& all_metrics() {
  static const std::vector<std::string> m = {"shd", "shd_norm", "sid", "precision", "recall", "f1", "runtime_s"};
  return m;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string render_bar_svg(const json& summary, const std::vector<std::string>& metrics) {
  std::vector<std::string> methods;
  for (auto it = summary.at("methods").begin(); it != summary.at("methods").end(); ++it) methods.push_back(it.key());
  const double bar = 28, gap = 36, left = 60, top = 30, height = 240;
  const double group_w = static_cast<double>(methods.size()) * bar + gap;
  const double width = left + static_cast<double>(metrics.size()) * group_w + 160;
  double ymax = 1.0;
  for (const auto& m : metrics) {
    for (const auto& name : methods) {
      const auto& s = summary["methods"][name][m];
      ymax = std::max(ymax, s.value("mean", 0.0) + s.value("std", 0.0));
    }
  }
  static const char* palette[] = {"#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948", "#b07aa1"};
  std::ostringstream svg;
  svg << std::fixed << std::setprecision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << top + height + 50
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top + height << "\" x2=\"" << width - 150 << "\" y2=\"" << top + height
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + height
      << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = ymax * t / 4.0;
    const double y = top + height - height * t / 4.0;
    svg << "<text x=\"" << left - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
  }
  for (std::size_t g = 0; g < metrics.size(); ++g) {
    const double gx = left + gap / 2 + static_cast<double>(g) * group_w;
    for (std::size_t k = 0; k < methods.size(); ++k) {
      const auto& s = summary["methods"][methods[k]][metrics[g]];
      const double mean = s.value("mean", 0.0), sd = s.value("std", 0.0);
      const double x = gx + static_cast<double>(k) * bar;
      const double h = height * mean / ymax;
      svg << "<rect x=\"" << x << "\" y=\"" << top + height - h << "\" width=\"" << bar - 4 << "\" height=\"" << h
          << "\" fill=\"" << palette[k % 7] << "\"/>\n";
      const double cx = x + (bar - 4) / 2;
      const double y_hi = top + height - height * (mean + sd) / ymax;
      const double y_lo = top + height - height * std::max(0.0, mean - sd) / ymax;
      svg << "<line x1=\"" << cx << "\" y1=\"" << y_hi << "\" x2=\"" << cx << "\" y2=\"" << y_lo
          << "\" stroke=\"black\"/>\n";
      svg << "<line x1=\"" << cx - 4 << "\" y1=\"" << y_hi << "\" x2=\"" << cx + 4 << "\" y2=\"" << y_hi
          << "\" stroke=\"black\"/>\n";
      svg << "<line x1=\"" << cx - 4 << "\" y1=\"" << y_lo << "\" x2=\"" << cx + 4 << "\" y2=\"" << y_lo
          << "\" stroke=\"black\"/>\n";
    }
    svg << "<text x=\"" << gx + static_cast<double>(methods.size()) * bar / 2 << "\" y=\"" << top + height + 18
        << "\" text-anchor=\"middle\">" << xml_escape(metrics[g]) << "</text>\n";
  }
  for (std::size_t k = 0; k < methods.size(); ++k) {
    const double y = top + 10 + static_cast<double>(k) * 18;
    svg << "<rect x=\"" << width - 140 << "\" y=\"" << y - 10 << "\" width=\"12\" height=\"12\" fill=\""
        << palette[k % 7] << "\"/>\n";
    svg << "<text x=\"" << width - 122 << "\" y=\"" << y << "\">" << xml_escape(methods[k]) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

CommandResult cmd_eval(const json& cfg, std::ostream& log) {
  const auto inputs = cfg.at("results").get<std::vector<std::string>>();
  if (inputs.empty()) throw ConfigError("eval needs at least one entry in \"results\"");
  const auto metrics = cfg.at("metrics").get<std::vector<std::string>>();
  for (const auto& m : metrics) {
    if (std::find(all_metrics().begin(), all_metrics().end(), m) == all_metrics().end()) {
      throw ConfigError("unknown metric '" + m + "'");
    }
  }
  std::vector<ResultRow> rows;
  for (const auto& in : inputs) {
    fs::path p = in;
    if (fs::is_directory(p)) p /= "results.csv";
    if (!fs::exists(p)) throw ConfigError("results file '" + p.string() + "' not found");
    auto part = read_results_csv(p);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  if (rows.empty()) throw RunError("no result rows to evaluate");

  CommandResult result;
  result.output_dir = require_output(cfg);
  write_json_file(result.output_dir / "config.resolved.json", cfg);
  write_results_csv(result.output_dir / "results.csv", rows);

  std::map<std::string, std::map<std::string, std::vector<double>>> samples;  // method -> metric -> values
  std::map<std::string, std::string> f1_modes;
  for (const auto& r : rows) {
    for (const auto& m : all_metrics()) {
      if (m == "sid" && r.sid < 0) continue;
      samples[r.method][m].push_back(metric_of(r, m));
    }
    f1_modes[r.method] = r.f1_mode;
  }
  json summary = {{"methods", json::object()}, {"comparisons", json::object()}, {"rows", rows.size()}};
  for (const auto& [method, by_metric] : samples) {
    json entry = {{"n", by_metric.at("shd").size()}, {"f1_mode", f1_modes[method]}};
    for (const auto& [m, xs] : by_metric) entry[m] = {{"mean", mean(xs)}, {"std", stddev(xs)}, {"n", xs.size()}};
    summary["methods"][method] = entry;
  }
  const double alpha_fdr = cfg.at("alpha_fdr").get<double>();
  for (const auto& m : metrics) {
    std::map<std::string, std::vector<double>> groups;
    for (const auto& [method, by_metric] : samples) {
      auto it = by_metric.find(m);
      if (it != by_metric.end() && it->second.size() >= 2) groups[method] = it->second;
    }
    json list = json::array();
    if (groups.size() >= 2) {
      for (const auto& c : welch_bh(groups, alpha_fdr)) {
        list.push_back({{"first", c.first},
                        {"second", c.second},
                        {"t", std::isfinite(c.test.t) ? json(c.test.t) : json(nullptr)},
                        {"dof", c.test.dof},
                        {"p_value", c.test.p_value},
                        {"p_adjusted", c.p_adjusted},
                        {"significant", c.significant}});
      }
    } else {
      result.warnings.push_back("metric " + m + ": fewer than two methods with two or more samples; no tests");
    }
    summary["comparisons"][m] = list;
  }
  write_json_file(result.output_dir / "summary.json", summary);
  write_text(result.output_dir / "plot.svg", render_bar_svg(summary, metrics));
  for (const auto& w : result.warnings) log << "eval: " << w << '\n';
  log << "eval: " << rows.size() << " rows, " << samples.size() << " methods\n";
  return result;
}

// ---------------------------------------------------------------- report

CommandResult cmd_report(const json& cfg, std::ostream& log) {
  const auto run = cfg.at("run").get<std::string>();
  if (run.empty() || !fs::is_directory(run)) throw ConfigError("report needs an existing \"run\" directory");
  CommandResult result;
  result.output_dir = cfg.at("output").get<std::string>().empty() ? fs::path(run) : require_output(cfg);
  std::ostringstream md;
  md << "# Run report\n\n";
  if (fs::exists(fs::path(run) / "run_info.json")) {
    auto info = json::parse(read_text(fs::path(run) / "run_info.json"));
    md << "- tool version: " << info.value("tool_version", "?") << "\n";
    md << "- repetitions: " << info.value("reps", 0) << "\n";
    md << "- failures: " << info.value("failures", json::array()).size() << "\n\n";
  }
  if (fs::exists(fs::path(run) / "results.csv")) {
    const auto rows = read_results_csv(fs::path(run) / "results.csv");
    std::map<std::string, std::vector<ResultRow>> by_method;
    for (const auto& r : rows) by_method[r.method].push_back(r);
    md << "| method | runs | SHD (norm.) | SID | F1 | F1 mode |\n|---|---|---|---|---|---|\n";
    md << std::fixed << std::setprecision(3);
    for (const auto& [m, rs] : by_method) {
      std::vector<double> s, sd, f;
      for (const auto& r : rs) {
        s.push_back(r.shd_norm);
        if (r.sid >= 0) sd.push_back(static_cast<double>(r.sid));
        f.push_back(r.f1);
      }
      md << "| " << m << " | " << rs.size() << " | " << mean(s) << " ± " << stddev(s) << " | "
         << (sd.empty() ? std::string("n/a") : fmt(mean(sd))) << " | " << mean(f) << " ± " << stddev(f) << " | "
         << rs.front().f1_mode << " |\n";
    }
    md << '\n';
  }
  for (const char* sub : {"run", "rep_000"}) {
    for (const char* stem : {"abapc", "abapc_llm"}) {
      const auto trace = fs::path(run) / sub / (std::string("trace_") + stem + ".txt");
      if (!fs::exists(trace)) continue;
      md << "## Solver trace (" << sub << ", " << stem << ")\n\n```\n" << read_text(trace) << "```\n\n";
    }
  }
  write_text(result.output_dir / "report.md", md.str());
  log << "report: " << (result.output_dir / "report.md").string() << '\n';
  return result;
}

}  // namespace argcd

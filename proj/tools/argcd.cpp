// SPDX-License-Identifier: Apache-2.0
//
// argcd: discover, elicit, genbench, eval and report from the command line.
// Every subcommand reads an optional --config JSON file; flags given on the
// command line override the matching keys.

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "argcd/llm.hpp"
#include "argcd/pipeline.hpp"
#include "argcd/version.hpp"

namespace {

using nlohmann::json;

struct Sub {
  CLI::App* app = nullptr;
  std::string config_path;
  json flags = json::object();
  std::vector<std::function<void()>> collectors;
};

template <typename T>
void flag(Sub& s, const std::string& name, const std::string& key, const std::string& help) {
  auto value = std::make_shared<T>();
  auto* opt = s.app->add_option(name, *value, help);
  s.collectors.push_back([&s, opt, value, key] {
    if (opt->count() > 0) s.flags[key] = *value;
  });
}

void switch_flag(Sub& s, const std::string& name, const std::string& key, const std::string& help) {
  auto* opt = s.app->add_flag(name, help);
  s.collectors.push_back([&s, opt, key] {
    if (opt->count() > 0) s.flags[key] = true;
  });
}

// A flag that sets one key inside a nested backend block.
template <typename T>
void block_flag(Sub& s, const std::string& name, const std::string& block, const std::string& key,
                const std::string& help) {
  auto value = std::make_shared<T>();
  auto* opt = s.app->add_option(name, *value, help);
  s.collectors.push_back([&s, opt, value, block, key] {
    if (opt->count() > 0) s.flags[block][key] = *value;
  });
}

void backend_flags(Sub& s) {
  flag<std::string>(s, "--mode", "mode", "Backend mode: fixture or live");
  flag<std::string>(s, "--fixtures", "fixture_dir", "Directory of recorded replies");
  flag<std::string>(s, "--endpoint", "endpoint", "Chat-completions URL (live mode)");
  flag<std::string>(s, "--model", "model", "Model name (live mode)");
  flag<double>(s, "--temperature", "temperature", "Sampling temperature");
  flag<std::string>(s, "--api-key-env", "api_key_env", "Environment variable holding the API key");
  flag<int>(s, "--k", "k", "Number of independent queries");
  flag<std::string>(s, "--prompt-template", "prompt_template", "Replacement prompt template file");
}

json merge_patch(json base, const json& patch) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (it.value().is_object() && base.contains(it.key()) && base[it.key()].is_object()) {
      base[it.key()] = merge_patch(base[it.key()], it.value());
    } else {
      base[it.key()] = it.value();
    }
  }
  return base;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"argcd: causal discovery with argumentation and language-model priors"};
  app.set_version_flag("--version", std::string(argcd::kVersion));
  app.require_subcommand(1);

  std::vector<std::unique_ptr<Sub>> subs;
  auto make = [&](const std::string& name, const std::string& help) -> Sub& {
    subs.push_back(std::make_unique<Sub>());
    Sub& s = *subs.back();
    s.app = app.add_subcommand(name, help);
    s.app->add_option("--config", s.config_path, "JSON configuration file")->check(CLI::ExistingFile);
    flag<std::string>(s, "--output,-o", "output", "Output directory");
    return s;
  };

  Sub& discover = make("discover", "Learn a DAG from data, optionally with semantic constraints");
  flag<std::string>(discover, "--data", "data", "Categorical CSV");
  flag<std::string>(discover, "--sidecar", "sidecar", "Variable metadata JSON for the CSV");
  flag<std::string>(discover, "--bundle", "bundle", "Benchmark bundle directory (resampled per repetition)");
  flag<std::string>(discover, "--truth", "truth", "True graph JSON for scoring");
  flag<std::string>(discover, "--variables", "variables", "Variable list used with --oracle");
  switch_flag(discover, "--oracle", "oracle", "Answer CI queries from the true graph");
  flag<std::string>(discover, "--constraints", "constraints", "Pre-parsed constraint JSON");
  flag<double>(discover, "--alpha", "alpha", "Significance level");
  flag<int>(discover, "--max-cond-size", "max_cond_size", "Largest conditioning set (-1: unbounded)");
  flag<std::string>(discover, "--reduce", "reduce", "Search-space reduction: skeleton or tau");
  flag<double>(discover, "--tau-hard", "tau_hard", "Credibility threshold for the tau reduction");
  flag<std::string>(discover, "--solver-mode", "solver_mode", "relaxation or maximize");
  flag<double>(discover, "--time-budget", "time_budget_s", "Solver wall-clock budget in seconds");
  flag<int>(discover, "--max-demotions", "max_demotions", "Cap on demoted facts (-1: none)");
  flag<int>(discover, "--reps", "reps", "Repetitions (bundle input)");
  flag<std::size_t>(discover, "--samples", "samples", "Rows per repetition (bundle input)");
  flag<std::uint64_t>(discover, "--seed", "seed", "Root seed");
  flag<int>(discover, "--workers", "workers", "Worker threads (0: all cores)");
  block_flag<std::string>(discover, "--llm-mode", "llm", "mode", "Elicit constraints with this backend mode");
  block_flag<std::string>(discover, "--llm-fixtures", "llm", "fixture_dir", "Fixture directory for elicitation");
  block_flag<int>(discover, "--llm-k", "llm", "k", "Elicitation queries");

  Sub& elicit = make("elicit", "Query a backend for required and forbidden directions");
  flag<std::string>(elicit, "--variables", "variables", "Variable list JSON");
  flag<std::string>(elicit, "--data", "data", "Take variables from this CSV");
  flag<std::string>(elicit, "--sidecar", "sidecar", "Variable metadata JSON for the CSV");
  backend_flags(elicit);
  bool print_hash = false;
  elicit.app->add_flag("--print-prompt-hash", print_hash, "Print the prompt's fixture directory name and exit");

  Sub& genbench = make("genbench", "Ground random DAG scaffolds in a causal knowledge graph");
  flag<std::string>(genbench, "--kg", "kg", "Knowledge graph file");
  flag<std::string>(genbench, "--kg-format", "kg_format", "tsv or causenet_jsonl");
  flag<std::vector<std::string>>(genbench, "--kind", "kinds", "Scaffold kinds (erdos_renyi, scale_free, lower_triangular)");
  flag<std::vector<int>>(genbench, "--nodes", "nodes", "Node counts");
  flag<double>(genbench, "--density", "density", "Edge density in (0, 1]");
  flag<std::vector<std::uint64_t>>(genbench, "--seed", "seeds", "Seeds");
  flag<std::vector<double>>(genbench, "--weights", "weights", "Compactness, specificity and correlation weights");
  flag<std::size_t>(genbench, "--cap", "cap", "Match enumeration cap");
  flag<std::size_t>(genbench, "--samples", "samples", "Rows sampled per benchmark");
  flag<std::string>(genbench, "--embedding", "embedding", "offline, table or http");
  flag<std::string>(genbench, "--embedding-table", "embedding_table", "Embedding table JSON");

  Sub& eval = make("eval", "Summaries and pairwise tests over results CSVs");
  flag<std::vector<std::string>>(eval, "--results", "results", "Results CSVs or discover output directories");
  flag<std::vector<std::string>>(eval, "--metrics", "metrics", "Metrics to test and plot");
  flag<double>(eval, "--alpha-fdr", "alpha_fdr", "False discovery rate");

  Sub& report = make("report", "Markdown digest of a discover run");
  flag<std::string>(report, "--run", "run", "Discover output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  for (auto& s : subs) {
    if (!s->app->parsed()) continue;
    const std::string command = s->app->get_name();
    try {
      for (auto& collect : s->collectors) collect();
      json overrides = s->config_path.empty() ? json::object() : argcd::read_config_file(s->config_path);
      overrides = merge_patch(overrides, s->flags);
      const json cfg = argcd::resolve_config(command, overrides);

      if (command == "elicit" && print_hash) {
        std::cout << argcd::prompt_hash(argcd::elicitation_prompt(cfg)) << '\n';
        return 0;
      }

      argcd::CommandResult r;
      if (command == "discover") r = argcd::cmd_discover(cfg, std::cerr);
      else if (command == "elicit") r = argcd::cmd_elicit(cfg, std::cerr);
      else if (command == "genbench") r = argcd::cmd_genbench(cfg, std::cerr);
      else if (command == "eval") r = argcd::cmd_eval(cfg, std::cerr);
      else r = argcd::cmd_report(cfg, std::cerr);
      if (!r.failures.empty()) {
        std::cerr << command << ": " << r.failures.size() << " failure(s)\n";
        return 2;
      }
      return 0;
    } catch (const argcd::ConfigError& e) {
      std::cerr << "argcd " << command << ": configuration error: " << e.what() << '\n';
      return 1;
    } catch (const std::exception& e) {
      std::cerr << "argcd " << command << ": " << e.what() << '\n';
      return 2;
    }
  }
  return 1;
}

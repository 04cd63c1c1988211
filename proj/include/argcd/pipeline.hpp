// SPDX-License-Identifier: Apache-2.0
//
// The command workflows behind the argcd tool. Each command takes one JSON
// configuration document (CLI flags are merged into it beforehand), rejects
// unknown keys, and writes the resolved configuration next to its outputs.

#pragma once

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace argcd {

/// Invalid or incomplete configuration; maps to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Work failed after configuration was accepted; maps to exit code 2.
class RunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Defaults for every command, as a JSON object keyed by command name.
nlohmann::json default_config(const std::string& command);

/// Overlays `overrides` on the defaults of `command`, rejecting unknown
/// keys and ill-typed values with ConfigError.
nlohmann::json resolve_config(const std::string& command, const nlohmann::json& overrides);

/// Reads a configuration file (a JSON object).
nlohmann::json read_config_file(const std::filesystem::path& path);

struct CommandResult {
  std::filesystem::path output_dir;
  std::vector<std::string> warnings;
  /// Repetitions or cells that failed while the command as a whole continued.
  std::vector<std::string> failures;
};

/// CI facts, skeleton reduction, semantic constraints and the solver, with
/// MPC and random baselines; scored when a true graph is available.
CommandResult cmd_discover(const nlohmann::json& config, std::ostream& log);

/// The elicitation prompt an `elicit` configuration would send.
std::string elicitation_prompt(const nlohmann::json& config);

/// Prompt, k backend queries, parsing and consensus.
CommandResult cmd_elicit(const nlohmann::json& config, std::ostream& log);

/// Grounded benchmark bundles for every (kind, nodes, seed) cell.
CommandResult cmd_genbench(const nlohmann::json& config, std::ostream& log);

/// Per-method summary, Welch/BH comparisons and an SVG plot from results CSVs.
CommandResult cmd_eval(const nlohmann::json& config, std::ostream& log);

/// Markdown digest of a discover run directory.
CommandResult cmd_report(const nlohmann::json& config, std::ostream& log);

struct ResultRow {
  std::string method;
  std::string dataset;
  std::uint64_t seed = 0;
  int shd = 0;
  double shd_norm = 0.0;
  long long sid = -1;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double runtime_s = 0.0;
  std::string f1_mode;
};

void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);

/// Grouped bars (one group per metric, one bar per method) with error bars.
std::string render_bar_svg(const nlohmann::json& summary, const std::vector<std::string>& metrics);

}  // namespace argcd

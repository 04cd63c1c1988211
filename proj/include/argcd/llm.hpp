// SPDX-License-Identifier: Apache-2.0
//
// Structural priors from a language-model backend: prompt rendering, k
// independent queries (live or replayed from fixtures), a tolerant parser
// for the two-list answer format, and consensus by intersection.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "argcd/dataset.hpp"
#include "argcd/graph.hpp"
#include "argcd/http.hpp"

namespace argcd {

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A run of k queries in which at least one failed; successful texts are kept.
class BackendRunError : public BackendError {
 public:
  BackendRunError(const std::string& what, std::vector<std::optional<std::string>> partial)
      : BackendError(what), partial_(std::move(partial)) {}
  const std::vector<std::optional<std::string>>& partial() const { return partial_; }

 private:
  std::vector<std::optional<std::string>> partial_;
};

struct NamedArrow {
  std::string cause;
  std::string effect;
  std::string justification;
};

struct ConstraintSet {
  std::vector<NamedArrow> required;
  std::vector<NamedArrow> forbidden;
  std::string source;
  std::vector<std::string> warnings;
};

nlohmann::json constraint_set_to_json(const ConstraintSet& s);
ConstraintSet constraint_set_from_json(const nlohmann::json& j);
ConstraintSet read_constraint_set(const std::filesystem::path& path);

/// Arrows as index pairs; throws std::invalid_argument on an unknown name.
std::vector<Edge> arrows_to_edges(const std::vector<NamedArrow>& arrows, const std::vector<std::string>& names);

const std::string& default_elicitation_template();
const std::string& default_extraction_template();
const std::string& default_descriptions_template();

/// Replaces every {{key}}; throws std::invalid_argument for a placeholder
/// without a value.
std::string render_template(const std::string& tmpl, const std::map<std::string, std::string>& values);

/// One consolidated prompt for all variables. Needs at least two variables.
std::string build_elicitation_prompt(const std::vector<VariableMeta>& variables,
                                     const std::string& tmpl = default_elicitation_template());

enum class BackendMode { fixture, live };

const char* to_string(BackendMode mode);
BackendMode backend_mode_from(const std::string& name);

struct BackendConfig {
  BackendMode mode = BackendMode::fixture;
  /// OpenAI-compatible chat-completions URL.
  std::string endpoint;
  std::string model;
  double temperature = 0.7;
  std::string api_key_env = "ARGCD_LLM_API_KEY";
  std::filesystem::path fixture_dir;
  HttpOptions http;
};

/// Throws BackendError when the configuration cannot work.
void validate_backend(const BackendConfig& cfg);

/// Fixture directory name for a prompt: 16 hex digits of its FNV-1a hash.
std::string prompt_hash(const std::string& prompt);

/// Fixture file of the i-th reply (1-based).
std::filesystem::path fixture_path(const BackendConfig& cfg, const std::string& prompt, int index);

/// k replies, in run order. Live queries run concurrently.
std::vector<std::string> query_backend(const std::string& prompt, int k, const BackendConfig& cfg);

/// Deterministic parser for the two-list format. Names are matched
/// longest-first, ignoring case and treating '_', '-' and spaces alike.
ConstraintSet parse_constraints(const std::string& raw, const std::vector<std::string>& names);

/// Second-stage extraction: the backend rewrites the reply as JSON, which
/// then goes through the same name validation as the parser output.
ConstraintSet extract_constraints(const std::string& raw, const std::vector<std::string>& names,
                                  const BackendConfig& extractor);

/// Intersection across runs; justifications come from the first run. Arrows
/// both required and forbidden are removed from both lists.
ConstraintSet consensus(const std::vector<ConstraintSet>& runs);

/// Fraction of listed arrows that agree with the truth: a required arrow must
/// be an edge, a forbidden arrow must not be. An empty set scores 1.
double constraint_precision(const ConstraintSet& s, const Dag& truth, const std::vector<std::string>& names);

/// True when the text pairs a causal phrase with the name of another variable.
bool description_leaks_structure(const std::string& description, const std::string& self,
                                 const std::vector<std::string>& names);

/// One description per variable, rendered from the true graph; throws
/// BackendError when a variable is missing or a description fails the guard.
std::vector<std::string> generate_descriptions(const Dag& truth, const std::vector<VariableMeta>& variables,
                                               const BackendConfig& cfg,
                                               const std::string& tmpl = default_descriptions_template());

}  // namespace argcd

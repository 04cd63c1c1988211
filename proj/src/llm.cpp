// SPDX-License-Identifier: Apache-2.0

#include "argcd/llm.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <future>
#include <regex>
#include <set>
#include <sstream>

#include "argcd/prompt_templates.hpp"
#include "argcd/synth.hpp"

namespace argcd {

namespace {

nlohmann::json arrows_json(const std::vector<NamedArrow>& arrows) {
  auto out = nlohmann::json::array();
  for (const auto& a : arrows) out.push_back({a.cause, a.effect, a.justification});
  return out;
}

std::vector<NamedArrow> arrows_from(const nlohmann::json& j) {
  std::vector<NamedArrow> out;
  for (const auto& item : j) {
    if (!item.is_array() || item.size() < 2 || item.size() > 3) {
      throw std::invalid_argument("constraint entries must be [cause, effect] or [cause, effect, justification]");
    }
    out.push_back({item[0].get<std::string>(), item[1].get<std::string>(),
                   item.size() == 3 ? item[2].get<std::string>() : std::string()});
  }
  return out;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

bool is_word(unsigned char c) { return std::isalnum(c) != 0; }

// Lowercased text with '_', '-' and whitespace runs folded to one space,
// plus the original offset of every kept character.
struct Folded {
  std::string text;
  std::vector<std::size_t> origin;
};

Folded fold(std::string_view s) {
  Folded f;
  bool space = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    if (c == '_' || c == '-' || std::isspace(c)) {
      space = true;
      continue;
    }
    if (space && !f.text.empty()) {
      f.text.push_back(' ');
      f.origin.push_back(i);
    }
    space = false;
    f.text.push_back(static_cast<char>(std::tolower(c)));
    f.origin.push_back(i);
  }
  return f;
}

struct NameMatch {
  int name = 0;
  std::size_t begin = 0;  // offsets into the original line
  std::size_t end = 0;
};

class NameIndex {
 public:
  explicit NameIndex(const std::vector<std::string>& names) : names_(names) {
    for (std::size_t i = 0; i < names.size(); ++i) folded_.push_back(fold(names[i]).text);
    order_.resize(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) order_[i] = static_cast<int>(i);
    std::stable_sort(order_.begin(), order_.end(),
                     [&](int a, int b) { return folded_[a].size() > folded_[b].size(); });
  }

  /// Non-overlapping mentions, scanning left to right, longest name first.
  std::vector<NameMatch> scan(std::string_view line) const {
    const Folded f = fold(line);
    std::vector<NameMatch> out;
    std::size_t i = 0;
    while (i < f.text.size()) {
      const bool boundary = i == 0 || !is_word(static_cast<unsigned char>(f.text[i - 1]));
      int hit = -1;
      if (boundary) {
        for (int k : order_) {
          const auto& nm = folded_[k];
          if (nm.empty() || f.text.compare(i, nm.size(), nm) != 0) continue;
          const std::size_t after = i + nm.size();
          if (after < f.text.size() && is_word(static_cast<unsigned char>(f.text[after]))) continue;
          hit = k;
          break;
        }
      }
      if (hit < 0) {
        ++i;
        continue;
      }
      const std::size_t last = i + folded_[hit].size() - 1;
      out.push_back({hit, f.origin[i], f.origin[last] + 1});
      i = last + 1;
    }
    return out;
  }

  /// Exact match after folding, or -1.
  int resolve(std::string_view name) const {
    const auto key = fold(name).text;
    for (std::size_t i = 0; i < folded_.size(); ++i) {
      if (folded_[i] == key) return static_cast<int>(i);
    }
    return -1;
  }

  const std::string& name(int i) const { return names_[i]; }

 private:
  const std::vector<std::string>& names_;
  std::vector<std::string> folded_;
  std::vector<int> order_;
};

enum class Section { none, required, forbidden };

// Header text such as "## Required Directions:" or "**Forbidden arrows**".
std::optional<std::pair<Section, std::string>> match_header(const std::string& line) {
  static const std::regex header(
      R"(^\s*(?:[-#>*]+\s*)?(?:\d+[.)]\s*)?\**\s*(required|forbidden)(?:\s+(?:causal\s+)?(?:directions?|arrows?|edges?|links?|relations(?:hips)?|constraints?))?\s*\**\s*(?::\s*\**)?\s*(.*)$)",
      std::regex::icase);
  std::smatch m;
  if (!std::regex_match(line, m, header)) return std::nullopt;
  const std::string word = lower(m[1].str());
  std::string rest = trim(m[2].str());
  // "Required: a -> b" is an inline header; "Required knowledge says ..." is prose.
  const bool bare = rest.empty();
  const bool inline_header = line.find(':') != std::string::npos;
  if (!bare && !inline_header) return std::nullopt;
  return std::make_pair(word == "required" ? Section::required : Section::forbidden, rest);
}

bool ends_section(const std::string& line) {
  const std::string t = trim(line);
  if (t.empty()) return false;
  if (t[0] == '#') return true;
  if (t.size() > 4 && t.rfind("**", 0) == 0 && t.substr(t.size() - 2) == "**") return true;
  return false;
}

bool is_placeholder(const std::string& line) {
  static const std::regex none(R"(^[\s\-*•.()\[\]]*(none|n/?a|nothing|no (confident )?(constraints?|pairs?|statements?))[\s.)\]]*$)",
                               std::regex::icase);
  return std::regex_match(line, none);
}

bool reversed_between(std::string_view between) {
  const std::string t = lower(std::string(between));
  static const char* markers[] = {"<-", "\xe2\x86\x90", "\xe2\x9f\xb5", "<=", "caused by", "effect of",
                                  "result of", "results from", "resulting from"};
  return std::any_of(std::begin(markers), std::end(markers),
                     [&](const char* m) { return t.find(m) != std::string::npos; });
}

std::string justification_after(std::string_view tail) {
  std::string t = trim(tail);
  static const char* leaders[] = {")", "]", "|", ":", "-", "\xe2\x80\x94", "\xe2\x80\x93", ",", ";", "because", "since"};
  for (bool changed = true; changed && !t.empty();) {
    changed = false;
    for (const char* l : leaders) {
      const std::size_t n = std::char_traits<char>::length(l);
      if (t.size() >= n && lower(t.substr(0, n)) == l) {
        t = trim(t.substr(n));
        changed = true;
      }
    }
  }
  while (!t.empty() && t.back() == '|') t = trim(t.substr(0, t.size() - 1));
  return t;
}

void add_unique(std::vector<NamedArrow>& list, NamedArrow a) {
  const bool seen = std::any_of(list.begin(), list.end(), [&](const NamedArrow& b) {
    return b.cause == a.cause && b.effect == a.effect;
  });
  if (!seen) list.push_back(std::move(a));
}

std::string render_variables(const std::vector<VariableMeta>& variables) {
  std::string out;
  for (const auto& v : variables) {
    out += "- " + v.name;
    if (!v.description.empty()) out += ": " + v.description;
    out += '\n';
  }
  if (!out.empty()) out.pop_back();
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string complete_live(const std::string& prompt, const BackendConfig& cfg) {
  nlohmann::json body = {{"model", cfg.model},
                         {"temperature", cfg.temperature},
                         {"messages", {{{"role", "user"}, {"content", prompt}}}}};
  auto reply = post_json(cfg.endpoint, body, env_or_empty(cfg.api_key_env), cfg.http);
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw BackendError("chat reply lacks choices[0].message.content");
  }
}

}  // namespace

nlohmann::json constraint_set_to_json(const ConstraintSet& s) {
  nlohmann::json j = {{"required", arrows_json(s.required)}, {"forbidden", arrows_json(s.forbidden)}};
  if (!s.source.empty()) j["source"] = s.source;
  if (!s.warnings.empty()) j["warnings"] = s.warnings;
  return j;
}

ConstraintSet constraint_set_from_json(const nlohmann::json& j) {
  ConstraintSet s;
  s.required = arrows_from(j.value("required", nlohmann::json::array()));
  s.forbidden = arrows_from(j.value("forbidden", nlohmann::json::array()));
  s.source = j.value("source", "");
  s.warnings = j.value("warnings", std::vector<std::string>{});
  return s;
}

ConstraintSet read_constraint_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open constraints file '" + path.string() + "'");
  return constraint_set_from_json(nlohmann::json::parse(in));
}

std::vector<Edge> arrows_to_edges(const std::vector<NamedArrow>& arrows, const std::vector<std::string>& names) {
  std::vector<Edge> out;
  for (const auto& a : arrows) {
    auto find = [&](const std::string& n) {
      auto it = std::find(names.begin(), names.end(), n);
      if (it == names.end()) throw std::invalid_argument("constraint names unknown variable '" + n + "'");
      return static_cast<Node>(it - names.begin());
    };
    out.emplace_back(find(a.cause), find(a.effect));
  }
  return out;
}

const std::string& default_elicitation_template() {
  static const std::string t = kElicitationTemplate;
  return t;
}
const std::string& default_extraction_template() {
  static const std::string t = kExtractionTemplate;
  return t;
}
const std::string& default_descriptions_template() {
  static const std::string t = kDescriptionsTemplate;
  return t;
}

std::string render_template(const std::string& tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string::npos) break;
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string::npos) break;
    const std::string key = trim(std::string_view(tmpl).substr(open + 2, close - open - 2));
    auto it = values.find(key);
    if (it == values.end()) throw std::invalid_argument("template placeholder {{" + key + "}} has no value");
    out.append(tmpl, pos, open - pos);
    out += it->second;
    pos = close + 2;
  }
  out.append(tmpl, pos, std::string::npos);
  return out;
}

std::string build_elicitation_prompt(const std::vector<VariableMeta>& variables, const std::string& tmpl) {
  if (variables.size() < 2) throw std::invalid_argument("elicitation needs at least two variables");
  if (tmpl.find("{{variables}}") == std::string::npos) {
    throw std::invalid_argument("elicitation template lacks the {{variables}} placeholder");
  }
  return render_template(tmpl, {{"variables", render_variables(variables)}});
}

const char* to_string(BackendMode mode) { return mode == BackendMode::live ? "live" : "fixture"; }

BackendMode backend_mode_from(const std::string& name) {
  if (name == "fixture") return BackendMode::fixture;
  if (name == "live") return BackendMode::live;
  throw BackendError("unknown backend mode '" + name + "' (expected fixture or live)");
}

void validate_backend(const BackendConfig& cfg) {
  if (cfg.mode == BackendMode::fixture) {
    if (cfg.fixture_dir.empty()) throw BackendError("fixture mode requires a fixture directory");
    if (!std::filesystem::is_directory(cfg.fixture_dir)) {
      throw BackendError("fixture directory '" + cfg.fixture_dir.string() + "' does not exist");
    }
    return;
  }
  if (cfg.endpoint.empty()) throw BackendError("live mode requires an endpoint URL");
  if (cfg.model.empty()) throw BackendError("live mode requires a model identifier");
  if (env_or_empty(cfg.api_key_env).empty()) {
    throw BackendError("live mode requires credentials in environment variable " + cfg.api_key_env);
  }
}

std::string prompt_hash(const std::string& prompt) { return hex64(fnv1a64(prompt)); }

std::filesystem::path fixture_path(const BackendConfig& cfg, const std::string& prompt, int index) {
  return cfg.fixture_dir / prompt_hash(prompt) / ("response_" + std::to_string(index) + ".txt");
}

std::vector<std::string> query_backend(const std::string& prompt, int k, const BackendConfig& cfg) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  validate_backend(cfg);
  std::vector<std::string> out;
  if (cfg.mode == BackendMode::fixture) {
    for (int i = 1; i <= k; ++i) {
      const auto path = fixture_path(cfg, prompt, i);
      if (!std::filesystem::is_regular_file(path)) throw BackendError("fixture missing: " + path.string());
      out.push_back(read_text(path));
    }
    return out;
  }
  std::vector<std::future<std::string>> calls;
  for (int i = 0; i < k; ++i) {
    calls.push_back(std::async(std::launch::async, [&] { return complete_live(prompt, cfg); }));
  }
  std::vector<std::optional<std::string>> partial(k);
  std::string first_error;
  for (int i = 0; i < k; ++i) {
    try {
      partial[i] = calls[i].get();
    } catch (const std::exception& e) {
      if (first_error.empty()) first_error = "query " + std::to_string(i + 1) + ": " + e.what();
    }
  }
  if (!first_error.empty()) throw BackendRunError(first_error, std::move(partial));
  for (auto& p : partial) out.push_back(std::move(*p));
  return out;
}

ConstraintSet parse_constraints(const std::string& raw, const std::vector<std::string>& names) {
  const NameIndex index(names);
  ConstraintSet out;
  Section section = Section::none;
  bool any_header = false;
  std::istringstream in(raw);
  std::string line;
  std::size_t lineno = 0;

  auto handle = [&](const std::string& text) {
    const std::string t = trim(text);
    if (t.empty() || is_placeholder(t)) return;
    const auto mentions = index.scan(t);
    std::vector<NameMatch> distinct;
    for (const auto& m : mentions) {
      if (distinct.empty() || m.name != distinct.front().name) distinct.push_back(m);
      if (distinct.size() == 2) break;
    }
    if (distinct.size() < 2) {
      out.warnings.push_back("line " + std::to_string(lineno) + ": no pair of known variables in '" + t +
                             "'; skipped");
      return;
    }
    const auto& a = distinct[0];
    const auto& b = distinct[1];
    NamedArrow arrow{index.name(a.name), index.name(b.name), justification_after(std::string_view(t).substr(b.end))};
    if (reversed_between(std::string_view(t).substr(a.end, b.begin - a.end))) std::swap(arrow.cause, arrow.effect);
    add_unique(section == Section::required ? out.required : out.forbidden, std::move(arrow));
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = match_header(line)) {
      section = h->first;
      any_header = true;
      if (!h->second.empty()) handle(h->second);
      continue;
    }
    if (section == Section::none) continue;
    if (ends_section(line)) {
      section = Section::none;
      continue;
    }
    const std::string t = trim(line);
    if (!t.empty() && t.back() == ':' && index.scan(t).size() < 2) {
      section = Section::none;
      continue;
    }
    handle(line);
  }
  if (!any_header) out.warnings.push_back("no Required/Forbidden Directions header found; nothing extracted");
  return out;
}

ConstraintSet extract_constraints(const std::string& raw, const std::vector<std::string>& names,
                                  const BackendConfig& extractor) {
  std::string listing;
  for (const auto& n : names) listing += "- " + n + "\n";
  if (!listing.empty()) listing.pop_back();
  const auto prompt = render_template(default_extraction_template(), {{"variables", listing}, {"response", raw}});
  const auto reply = query_backend(prompt, 1, extractor).front();
  const auto open = reply.find('{');
  const auto close = reply.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw BackendError("extractor reply contains no JSON object");
  }
  auto j = nlohmann::json::parse(reply.substr(open, close - open + 1), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw BackendError("extractor reply is not valid JSON");

  const NameIndex index(names);
  ConstraintSet out;
  auto take = [&](const char* key, std::vector<NamedArrow>& list) {
    if (!j.contains(key)) return;
    for (const auto& item : j.at(key)) {
      if (!item.is_array() || item.size() < 2 || !item[0].is_string() || !item[1].is_string()) {
        out.warnings.push_back(std::string("malformed ") + key + " entry skipped");
        continue;
      }
      const int c = index.resolve(item[0].get<std::string>());
      const int e = index.resolve(item[1].get<std::string>());
      if (c < 0 || e < 0 || c == e) {
        out.warnings.push_back(std::string(key) + " entry " + item.dump() + " names an unknown variable; skipped");
        continue;
      }
      std::string why = item.size() > 2 && item[2].is_string() ? item[2].get<std::string>() : std::string();
      add_unique(list, {index.name(c), index.name(e), why});
    }
  };
  take("required", out.required);
  take("forbidden", out.forbidden);
  return out;
}

ConstraintSet consensus(const std::vector<ConstraintSet>& runs) {
  if (runs.empty()) throw std::invalid_argument("consensus needs at least one run");
  using Key = std::pair<std::string, std::string>;
  auto keys = [](const std::vector<NamedArrow>& list) {
    std::set<Key> s;
    for (const auto& a : list) s.emplace(a.cause, a.effect);
    return s;
  };
  auto intersect = [&](std::vector<NamedArrow> ConstraintSet::*list) {
    std::vector<NamedArrow> kept;
    for (const auto& a : runs.front().*list) {
      const Key k{a.cause, a.effect};
      const bool everywhere = std::all_of(runs.begin() + 1, runs.end(),
                                          [&](const ConstraintSet& r) { return keys(r.*list).count(k) > 0; });
      if (everywhere) add_unique(kept, a);
    }
    std::sort(kept.begin(), kept.end(), [](const NamedArrow& x, const NamedArrow& y) {
      return std::tie(x.cause, x.effect) < std::tie(y.cause, y.effect);
    });
    return kept;
  };
  ConstraintSet out;
  out.required = intersect(&ConstraintSet::required);
  out.forbidden = intersect(&ConstraintSet::forbidden);
  const auto req = keys(out.required);
  const auto forb = keys(out.forbidden);
  std::set<Key> clash;
  for (const auto& k : req) {
    if (forb.count(k)) clash.insert(k);
  }
  auto drop = [&](std::vector<NamedArrow>& list) {
    list.erase(std::remove_if(list.begin(), list.end(),
                              [&](const NamedArrow& a) { return clash.count({a.cause, a.effect}) > 0; }),
               list.end());
  };
  drop(out.required);
  drop(out.forbidden);
  for (const auto& [c, e] : clash) {
    out.warnings.push_back("arrow " + c + " -> " + e + " is both required and forbidden after consensus; dropped");
  }
  out.source = "consensus of " + std::to_string(runs.size()) + " runs";
  return out;
}

double constraint_precision(const ConstraintSet& s, const Dag& truth, const std::vector<std::string>& names) {
  const auto req = arrows_to_edges(s.required, names);
  const auto forb = arrows_to_edges(s.forbidden, names);
  const std::size_t total = req.size() + forb.size();
  if (total == 0) return 1.0;
  std::size_t correct = 0;
  for (auto [u, v] : req) correct += truth.has_edge(u, v);
  for (auto [u, v] : forb) correct += !truth.has_edge(u, v);
  return static_cast<double>(correct) / static_cast<double>(total);
}

bool description_leaks_structure(const std::string& description, const std::string& self,
                                 const std::vector<std::string>& names) {
  static const std::regex causal(
      R"(\b(causes?|caused|causing|leads? to|led to|leading to|results? in|resulted in|resulting in)\b)",
      std::regex::icase);
  const Folded text = fold(description);
  if (!std::regex_search(text.text, causal)) return false;
  std::vector<std::string> others;
  for (const auto& n : names) {
    if (fold(n).text != fold(self).text) others.push_back(n);
  }
  return !NameIndex(others).scan(description).empty();
}

std::vector<std::string> generate_descriptions(const Dag& truth, const std::vector<VariableMeta>& variables,
                                               const BackendConfig& cfg, const std::string& tmpl) {
  if (static_cast<int>(variables.size()) != truth.size()) {
    throw std::invalid_argument("one variable per graph node is required");
  }
  std::vector<std::string> names;
  for (const auto& v : variables) names.push_back(v.name);
  std::vector<VariableMeta> bare;
  for (const auto& n : names) bare.push_back({n, ""});
  std::string relations;
  for (auto [u, v] : truth.edges()) relations += "- " + names[u] + " -> " + names[v] + "\n";
  if (relations.empty()) relations = "(none)";
  else relations.pop_back();
  const auto prompt = render_template(tmpl, {{"variables", render_variables(bare)}, {"relations", relations}});
  const auto reply = query_backend(prompt, 1, cfg).front();

  const NameIndex index(names);
  std::vector<std::string> out(names.size());
  std::istringstream in(reply);
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    while (!t.empty() && (t[0] == '-' || t[0] == '*' || t[0] == '#')) t = trim(t.substr(1));
    const auto colon = t.find(':');
    if (colon == std::string::npos) continue;
    std::string head = t.substr(0, colon);
    head.erase(std::remove(head.begin(), head.end(), '*'), head.end());
    const int v = index.resolve(trim(head));
    if (v < 0 || !out[v].empty()) continue;
    out[v] = trim(t.substr(colon + 1));
  }
  for (std::size_t v = 0; v < names.size(); ++v) {
    if (out[v].empty()) throw BackendError("no description returned for '" + names[v] + "'");
    if (description_leaks_structure(out[v], names[v], names)) {
      throw BackendError("description of '" + names[v] + "' states a causal link to another variable: " + out[v]);
    }
  }
  return out;
}

}  // namespace argcd

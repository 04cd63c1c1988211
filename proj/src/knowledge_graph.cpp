// SPDX-License-Identifier: Apache-2.0

#include "argcd/knowledge_graph.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>

#include <json.hpp>

#include "argcd/synth.hpp"

namespace argcd {

std::string normalize_concept(std::string_view name) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : name) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

KnowledgeGraph::KnowledgeGraph(std::vector<std::string> concepts, std::vector<Edge> edges)
    : concepts_(std::move(concepts)), edges_(std::move(edges)) {
  if (!std::is_sorted(concepts_.begin(), concepts_.end()) ||
      std::adjacent_find(concepts_.begin(), concepts_.end()) != concepts_.end()) {
    throw KnowledgeGraphError("concept names must be sorted and unique");
  }
  std::sort(edges_.begin(), edges_.end());
  if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
    throw KnowledgeGraphError("duplicate edge");
  }
  const int n = size();
  out_.resize(n);
  in_.resize(n);
  for (auto [u, v] : edges_) {
    if (u < 0 || v < 0 || u >= n || v >= n) throw KnowledgeGraphError("edge endpoint out of range");
    if (u == v) throw KnowledgeGraphError("self-loop on '" + concepts_[u] + "'");
    out_[u].push_back(v);
    in_[v].push_back(u);
  }
  for (auto& a : in_) std::sort(a.begin(), a.end());
}

Node KnowledgeGraph::index_of(std::string_view name) const {
  auto it = std::lower_bound(concepts_.begin(), concepts_.end(), name);
  return it != concepts_.end() && *it == name ? static_cast<Node>(it - concepts_.begin()) : -1;
}

bool KnowledgeGraph::has_edge(Node u, Node v) const {
  const auto& s = out_[u];
  return std::binary_search(s.begin(), s.end(), v);
}

KnowledgeGraph make_knowledge_graph(const std::vector<std::pair<std::string, std::string>>& named,
                                    KgLoadReport* report) {
  KgLoadReport local;
  KgLoadReport& r = report ? *report : local;
  std::set<std::pair<std::string, std::string>> unique;
  for (const auto& [c, e] : named) {
    auto cause = normalize_concept(c);
    auto effect = normalize_concept(e);
    if (cause.empty() || effect.empty()) {
      ++r.malformed;
      continue;
    }
    if (cause == effect) {
      ++r.self_loops;
      continue;
    }
    if (!unique.emplace(std::move(cause), std::move(effect)).second) ++r.duplicates;
  }
  std::set<std::string> names;
  for (const auto& [c, e] : unique) {
    names.insert(c);
    names.insert(e);
  }
  std::vector<std::string> concepts(names.begin(), names.end());
  auto index = [&](const std::string& s) {
    return static_cast<Node>(std::lower_bound(concepts.begin(), concepts.end(), s) - concepts.begin());
  };
  std::vector<Edge> edges;
  for (const auto& [c, e] : unique) edges.emplace_back(index(c), index(e));
  if (r.duplicates) r.warnings.push_back(std::to_string(r.duplicates) + " duplicate dropped");
  if (r.self_loops) r.warnings.push_back(std::to_string(r.self_loops) + " self-loop dropped");
  return KnowledgeGraph(std::move(concepts), std::move(edges));
}

KgFormat kg_format_from(const std::string& name) {
  if (name == "tsv") return KgFormat::tsv;
  if (name == "causenet_jsonl" || name == "jsonl") return KgFormat::causenet_jsonl;
  throw KnowledgeGraphError("unknown knowledge-graph format '" + name + "'");
}

namespace {

std::optional<std::string> concept_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return std::nullopt;
  const auto& v = j.at(key);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_object() && v.contains("concept") && v.at("concept").is_string()) {
    return v.at("concept").get<std::string>();
  }
  return std::nullopt;
}

}  // namespace

KnowledgeGraph load_knowledge_graph(const std::filesystem::path& path, KgFormat format, KgLoadReport* report) {
  std::ifstream in(path);
  if (!in) throw KnowledgeGraphError("cannot open knowledge graph '" + path.string() + "'");
  KgLoadReport local;
  KgLoadReport& r = report ? *report : local;
  std::vector<std::pair<std::string, std::string>> named;
  std::string line;
  std::size_t lineno = 0;
  auto malformed = [&](const std::string& why) {
    ++r.malformed;
    r.warnings.push_back(path.filename().string() + ":" + std::to_string(lineno) + ": " + why + "; skipped");
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ++r.lines;
    if (format == KgFormat::tsv) {
      if (line[0] == '#') continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
        malformed("expected two tab-separated fields");
        continue;
      }
      named.emplace_back(line.substr(0, tab), line.substr(tab + 1));
      continue;
    }
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      malformed("invalid JSON");
      continue;
    }
    const auto& rel = j.contains("causal_relation") ? j.at("causal_relation") : j;
    auto cause = concept_field(rel, "cause");
    auto effect = concept_field(rel, "effect");
    if (!cause || !effect) {
      malformed("missing cause/effect concept");
      continue;
    }
    named.emplace_back(*cause, *effect);
  }
  auto kg = make_knowledge_graph(named, &r);
  if (kg.num_edges() == 0) throw KnowledgeGraphError("knowledge graph '" + path.string() + "' has no edges");
  return kg;
}

bool is_induced_match(const Dag& pattern, const KnowledgeGraph& kg, const Mapping& mapping) {
  const int n = pattern.size();
  if (static_cast<int>(mapping.size()) != n) return false;
  for (Node c : mapping) {
    if (c < 0 || c >= kg.size()) return false;
  }
  Mapping sorted = mapping;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) return false;
  for (Node u = 0; u < n; ++u) {
    for (Node v = 0; v < n; ++v) {
      if (u != v && pattern.has_edge(u, v) != kg.has_edge(mapping[u], mapping[v])) return false;
    }
  }
  return true;
}

namespace {

class Matcher {
 public:
  Matcher(const Dag& pattern, const KnowledgeGraph& kg, std::size_t cap, std::uint64_t seed)
      : p_(pattern), kg_(kg), cap_(cap), n_(pattern.size()) {
    build_order();
    root_candidates_.resize(kg.size());
    std::iota(root_candidates_.begin(), root_candidates_.end(), 0);
    Rng rng(seed);
    rng.shuffle(root_candidates_);
    mapping_.assign(n_, -1);
    used_.assign(kg.size(), 0);
  }

  std::vector<Mapping> run() {
    if (n_ > 0 && n_ <= kg_.size()) extend(0);
    return std::move(found_);
  }

 private:
  // Breadth-first over the undirected pattern, each component rooted at its
  // highest-degree node (ties: lowest index).
  void build_order() {
    std::vector<char> seen(n_, 0);
    auto degree = [&](Node v) { return p_.parents(v).size() + p_.children(v).size(); };
    while (static_cast<int>(order_.size()) < n_) {
      Node root = -1;
      for (Node v = 0; v < n_; ++v) {
        if (!seen[v] && (root < 0 || degree(v) > degree(root))) root = v;
      }
      anchor_.push_back(-1);
      order_.push_back(root);
      seen[root] = 1;
      for (std::size_t head = order_.size() - 1; head < order_.size(); ++head) {
        Node v = order_[head];
        std::vector<Node> nbrs = p_.parents(v);
        nbrs.insert(nbrs.end(), p_.children(v).begin(), p_.children(v).end());
        std::sort(nbrs.begin(), nbrs.end());
        for (Node w : nbrs) {
          if (seen[w]) continue;
          seen[w] = 1;
          order_.push_back(w);
          anchor_.push_back(v);
        }
      }
    }
  }

  bool feasible(Node p, Node c) const {
    if (used_[c]) return false;
    if (kg_.successors(c).size() < p_.children(p).size()) return false;
    if (kg_.predecessors(c).size() < p_.parents(p).size()) return false;
    for (Node q = 0; q < n_; ++q) {
      const Node d = mapping_[q];
      if (d < 0 || q == p) continue;
      if (p_.has_edge(p, q) != kg_.has_edge(c, d)) return false;
      if (p_.has_edge(q, p) != kg_.has_edge(d, c)) return false;
    }
    return true;
  }

  void extend(std::size_t depth) {
    if (found_.size() >= cap_) return;
    if (depth == order_.size()) {
      found_.push_back(mapping_);
      return;
    }
    const Node p = order_[depth];
    const Node anchor = anchor_[depth];
    std::vector<Node> pool;
    if (anchor < 0) {
      pool = root_candidates_;
    } else {
      const Node a = mapping_[anchor];
      pool = p_.has_edge(anchor, p) ? kg_.successors(a) : kg_.predecessors(a);
    }
    for (Node c : pool) {
      if (!feasible(p, c)) continue;
      mapping_[p] = c;
      used_[c] = 1;
      extend(depth + 1);
      used_[c] = 0;
      mapping_[p] = -1;
      if (found_.size() >= cap_) return;
    }
  }

  const Dag& p_;
  const KnowledgeGraph& kg_;
  std::size_t cap_;
  int n_;
  std::vector<Node> order_;
  std::vector<Node> anchor_;
  std::vector<Node> root_candidates_;
  Mapping mapping_;
  std::vector<char> used_;
  std::vector<Mapping> found_;
};

}  // namespace

std::vector<Mapping> enumerate_isomorphisms(const Dag& pattern, const KnowledgeGraph& kg, std::size_t cap,
                                            std::uint64_t seed) {
  if (pattern.size() == 0) throw KnowledgeGraphError("pattern must have at least one node");
  return Matcher(pattern, kg, cap, seed).run();
}

}  // namespace argcd

// SPDX-License-Identifier: Apache-2.0

#include "argcd/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>

#include "argcd/graph_io.hpp"
#include "argcd/version.hpp"

namespace argcd {

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double spearman_rho(const std::vector<double>& xs, const std::vector<double>& ys, bool* degenerate) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw std::invalid_argument("spearman_rho needs two equal-length samples of size >= 2");
  }
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (degenerate) *degenerate = sxx == 0.0 || syy == 0.0;
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CandidateMatch score_candidate(const Dag& pattern, const KnowledgeGraph& kg, const Mapping& mapping,
                               EmbeddingProvider& embeddings) {
  const int n = pattern.size();
  CandidateMatch m;
  m.mapping = mapping;

  std::vector<Vector> vecs;
  for (Node c : mapping) vecs.push_back(embeddings.embed(kg.name(c)));
  Vector centroid(vecs.front().size(), 0.0);
  for (const auto& v : vecs) {
    for (std::size_t k = 0; k < v.size(); ++k) centroid[k] += v[k];
  }
  double norm = 0.0;
  for (double x : centroid) norm += x * x;
  for (const auto& v : vecs) m.compactness += norm > 0.0 ? 1.0 - cosine_similarity(v, centroid) : 1.0;
  m.compactness /= n;

  for (Node c : mapping) m.specificity += std::log1p(static_cast<double>(kg.degree(c)));
  m.specificity /= n;

  // Hop distances on the undirected view of the matched sub-graph, which is
  // the pattern itself up to relabelling.
  std::vector<double> hops, cosine_dist;
  for (Node s = 0; s < n; ++s) {
    std::vector<int> dist(n, -1);
    std::queue<Node> q;
    dist[s] = 0;
    q.push(s);
    while (!q.empty()) {
      Node v = q.front();
      q.pop();
      for (const auto* nbrs : {&pattern.parents(v), &pattern.children(v)}) {
        for (Node w : *nbrs) {
          if (dist[w] < 0) {
            dist[w] = dist[v] + 1;
            q.push(w);
          }
        }
      }
    }
    for (Node t = s + 1; t < n; ++t) {
      if (dist[t] < 0) continue;
      hops.push_back(dist[t]);
      cosine_dist.push_back(1.0 - cosine_similarity(vecs[s], vecs[t]));
    }
  }
  m.correlation = hops.size() < 2 ? 1.0 : 1.0 - spearman_rho(hops, cosine_dist);
  return m;
}

void weigh_candidates(std::vector<CandidateMatch>& batch, const CostWeights& w) {
  auto scaled = [&](double CandidateMatch::*field) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& m : batch) {
      lo = std::min(lo, m.*field);
      hi = std::max(hi, m.*field);
    }
    std::vector<double> out;
    for (const auto& m : batch) out.push_back(hi > lo ? (m.*field - lo) / (hi - lo) : 0.0);
    return out;
  };
  const auto c = scaled(&CandidateMatch::compactness);
  const auto s = scaled(&CandidateMatch::specificity);
  const auto r = scaled(&CandidateMatch::correlation);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    batch[i].total = w.compactness * c[i] + w.specificity * s[i] + w.correlation * r[i];
  }
}

std::size_t best_candidate(const std::vector<CandidateMatch>& batch, const KnowledgeGraph& kg) {
  if (batch.empty()) throw UngroundableError("no candidate to choose from");
  auto names = [&](const CandidateMatch& m) {
    std::vector<std::string> out;
    for (Node c : m.mapping) out.push_back(kg.name(c));
    return out;
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < batch.size(); ++i) {
    if (batch[i].total < batch[best].total ||
        (batch[i].total == batch[best].total && names(batch[i]) < names(batch[best]))) {
      best = i;
    }
  }
  return best;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) {
  // splitmix64 finaliser over the seed mixed with the purpose hash.
  std::uint64_t z = seed ^ fnv1a64(purpose);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

nlohmann::json costs_json(const CandidateMatch& m) {
  return {{"compactness", m.compactness},
          {"specificity", m.specificity},
          {"correlation", m.correlation},
          {"total", m.total}};
}

}  // namespace

GroundedBenchmark select_benchmark(const Dag& pattern, const KnowledgeGraph& kg, EmbeddingProvider& embeddings,
                                   const SelectOptions& opt) {
  const auto mappings = enumerate_isomorphisms(pattern, kg, opt.cap, derive_seed(opt.seed, "match"));
  if (mappings.empty()) {
    throw UngroundableError("ungroundable pattern: no induced match of the " + std::to_string(pattern.size()) +
                            "-node pattern in the knowledge graph; try a smaller or denser pattern");
  }
  std::vector<CandidateMatch> batch;
  batch.reserve(mappings.size());
  for (const auto& m : mappings) batch.push_back(score_candidate(pattern, kg, m, embeddings));
  weigh_candidates(batch, opt.weights);
  const auto& chosen = batch[best_candidate(batch, kg)];
  if (!is_induced_match(pattern, kg, chosen.mapping)) {
    throw UngroundableError("internal error: chosen match is not an induced isomorphism");
  }

  GroundedBenchmark b;
  b.dag = pattern;
  for (Node c : chosen.mapping) b.variables.push_back({kg.name(c), ""});
  const auto cards =
      random_cardinalities(pattern.size(), opt.cardinality_lo, opt.cardinality_hi, derive_seed(opt.seed, "card"));
  b.bn = sample_bn(pattern, cards, derive_seed(opt.seed, "cpt"));
  b.data = forward_sample(b.bn, opt.samples, derive_seed(opt.seed, "data"), b.variables);
  b.provenance = {
      {"tool_version", kVersion},
      {"seed", opt.seed},
      {"weights",
       {{"compactness", opt.weights.compactness},
        {"specificity", opt.weights.specificity},
        {"correlation", opt.weights.correlation}}},
      {"cap", opt.cap},
      {"matches_scored", batch.size()},
      {"embedding", embeddings.describe()},
      {"chosen_costs", costs_json(chosen)},
      {"samples", opt.samples},
      {"cardinality_range", {opt.cardinality_lo, opt.cardinality_hi}},
  };
  return b;
}

namespace {

constexpr const char* kBundleFiles[] = {"graph.json", "variables.json", "cpts.json", "data.csv", "provenance.json"};

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  return nlohmann::json::parse(in);
}

}  // namespace

void write_bundle(const std::filesystem::path& dir, const GroundedBenchmark& b) {
  std::filesystem::create_directories(dir);
  write_json(dir / "graph.json", graph_to_json(b.dag));
  auto vars = nlohmann::json::array();
  for (std::size_t i = 0; i < b.variables.size(); ++i) {
    vars.push_back({{"name", b.variables[i].name},
                    {"description", b.variables[i].description},
                    {"cardinality", b.bn.cardinalities[i]}});
  }
  write_json(dir / "variables.json", vars);
  write_json(dir / "cpts.json", cpts_to_json(b.bn));
  write_dataset_csv(b.data, dir / "data.csv");
  write_json(dir / "provenance.json", b.provenance);
}

GroundedBenchmark read_bundle(const std::filesystem::path& dir) {
  GroundedBenchmark b;
  b.dag = dag_from_json(read_json(dir / "graph.json"));
  std::vector<int> cards;
  for (const auto& v : read_json(dir / "variables.json")) {
    b.variables.push_back({v.at("name").get<std::string>(), v.value("description", "")});
    cards.push_back(v.at("cardinality").get<int>());
  }
  if (static_cast<int>(b.variables.size()) != b.dag.size()) {
    throw std::runtime_error("bundle '" + dir.string() + "': variables.json does not match graph.json");
  }
  b.bn = bn_from_json(b.dag, cards, read_json(dir / "cpts.json"));
  Dataset raw = read_dataset_csv(dir / "data.csv");
  if (raw.names() != [&] {
        std::vector<std::string> n;
        for (const auto& v : b.variables) n.push_back(v.name);
        return n;
      }()) {
    throw std::runtime_error("bundle '" + dir.string() + "': data.csv columns do not match variables.json");
  }
  std::vector<std::vector<int>> cols;
  for (int v = 0; v < raw.num_vars(); ++v) cols.emplace_back(raw.column(v).begin(), raw.column(v).end());
  b.data = Dataset(b.variables, cards, std::move(cols), raw.num_rows());
  if (std::filesystem::exists(dir / "provenance.json")) b.provenance = read_json(dir / "provenance.json");
  return b;
}

std::string bundle_checksum(const std::filesystem::path& dir) {
  std::string all;
  for (const char* name : kBundleFiles) {
    std::ifstream in(dir / name, std::ios::binary);
    if (!in) throw std::runtime_error("bundle file missing: " + (dir / name).string());
    std::ostringstream ss;
    ss << in.rdbuf();
    all += name;
    all.push_back('\0');
    all += ss.str();
    all.push_back('\0');
  }
  return hex64(fnv1a64(all));
}

}  // namespace argcd

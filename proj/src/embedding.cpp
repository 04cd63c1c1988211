// SPDX-License-Identifier: Apache-2.0

#include "argcd/embedding.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "argcd/knowledge_graph.hpp"
#include "argcd/synth.hpp"

namespace argcd {

double cosine_similarity(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("embedding dimensions differ");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

void normalize_l2(Vector& v) {
  double ss = 0.0;
  for (double x : v) ss += x * x;
  if (ss == 0.0) throw std::invalid_argument("cannot normalise a zero vector");
  const double inv = 1.0 / std::sqrt(ss);
  for (double& x : v) x *= inv;
}

Vector OfflineEmbedding::embed(const std::string& name) {
  const auto key = normalize_concept(name);
  if (key.empty()) throw std::invalid_argument("cannot embed an empty name");
  Rng rng(fnv1a64(key));
  Vector v(dim_);
  for (double& x : v) x = rng.normal();
  normalize_l2(v);
  return v;
}

TableEmbedding::TableEmbedding(std::map<std::string, Vector> table) {
  for (auto& [name, vec] : table) {
    normalize_l2(vec);
    table_.emplace(normalize_concept(name), std::move(vec));
  }
}

TableEmbedding TableEmbedding::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding table '" + path.string() + "'");
  auto j = nlohmann::json::parse(in);
  return TableEmbedding(j.get<std::map<std::string, Vector>>());
}

Vector TableEmbedding::embed(const std::string& name) {
  auto it = table_.find(normalize_concept(name));
  if (it == table_.end()) throw std::out_of_range("no embedding for '" + name + "'");
  return it->second;
}

HttpEmbedding::HttpEmbedding(HttpEmbeddingConfig config) : config_(std::move(config)) {
  if (config_.url.empty()) throw std::invalid_argument("embedding endpoint URL is empty");
  if (!config_.cache_dir.empty()) std::filesystem::create_directories(config_.cache_dir);
}

std::filesystem::path HttpEmbedding::cache_file(const std::string& name) const {
  return config_.cache_dir / (hex64(fnv1a64(config_.model + '\n' + name)) + ".json");
}

Vector HttpEmbedding::embed(const std::string& raw) {
  const auto name = normalize_concept(raw);
  if (name.empty()) throw std::invalid_argument("cannot embed an empty name");
  std::lock_guard lock(mutex_);
  if (auto it = memo_.find(name); it != memo_.end()) return it->second;
  if (!config_.cache_dir.empty()) {
    std::ifstream in(cache_file(name));
    if (in) {
      auto j = nlohmann::json::parse(in, nullptr, false);
      if (!j.is_discarded() && j.value("name", "") == name) {
        auto v = j.at("vector").get<Vector>();
        memo_.emplace(name, v);
        return v;
      }
    }
  }
  ++network_calls_;
  nlohmann::json body = {{"model", config_.model}, {"input", name}};
  auto reply = post_json(config_.url, body, env_or_empty(config_.api_key_env), config_.http);
  Vector v;
  try {
    v = reply.at("data").at(0).at("embedding").get<Vector>();
  } catch (const nlohmann::json::exception&) {
    throw HttpError("embedding reply lacks data[0].embedding");
  }
  normalize_l2(v);
  if (!config_.cache_dir.empty()) {
    std::ofstream out(cache_file(name));
    out << nlohmann::json{{"name", name}, {"model", config_.model}, {"vector", v}}.dump() << '\n';
  }
  memo_.emplace(name, v);
  return v;
}

}  // namespace argcd

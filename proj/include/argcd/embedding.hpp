// SPDX-License-Identifier: Apache-2.0
//
// Concept embeddings. Every provider returns L2-normalised vectors for the
// normalised concept name.

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "argcd/http.hpp"

namespace argcd {

using Vector = std::vector<double>;

double cosine_similarity(const Vector& a, const Vector& b);
void normalize_l2(Vector& v);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual Vector embed(const std::string& name) = 0;
  virtual std::string describe() const = 0;
  /// Requests that actually went over the network.
  std::size_t network_calls() const { return network_calls_; }

 protected:
  std::size_t network_calls_ = 0;
};

/// Gaussian vector seeded by the FNV-1a hash of the normalised name.
class OfflineEmbedding final : public EmbeddingProvider {
 public:
  explicit OfflineEmbedding(int dim = 64) : dim_(dim) {}
  Vector embed(const std::string& name) override;
  std::string describe() const override { return "offline-hash-" + std::to_string(dim_); }

 private:
  int dim_;
};

/// Fixed vectors, e.g. loaded from {"name": [..], ...}. Unknown names throw.
class TableEmbedding final : public EmbeddingProvider {
 public:
  explicit TableEmbedding(std::map<std::string, Vector> table);
  static TableEmbedding from_file(const std::filesystem::path& path);
  Vector embed(const std::string& name) override;
  std::string describe() const override { return "table"; }

 private:
  std::map<std::string, Vector> table_;
};

struct HttpEmbeddingConfig {
  /// OpenAI-compatible embeddings endpoint.
  std::string url;
  std::string model;
  std::string api_key_env = "ARGCD_EMBEDDING_API_KEY";
  /// Empty disables the on-disk cache.
  std::filesystem::path cache_dir;
  HttpOptions http;
};

/// Remote provider with an on-disk cache keyed by name; safe to share
/// across threads.
class HttpEmbedding final : public EmbeddingProvider {
 public:
  explicit HttpEmbedding(HttpEmbeddingConfig config);
  Vector embed(const std::string& name) override;
  std::string describe() const override { return "http:" + config_.model; }

 private:
  std::filesystem::path cache_file(const std::string& name) const;

  HttpEmbeddingConfig config_;
  std::mutex mutex_;
  std::map<std::string, Vector> memo_;
};

}  // namespace argcd

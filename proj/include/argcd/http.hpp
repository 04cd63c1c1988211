// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

namespace argcd {

class HttpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HttpOptions {
  double timeout_s = 60.0;
  /// Extra attempts after the first, for transport failures, 429 and 5xx.
  int retries = 3;
  /// Delay before the first retry; doubled on every further attempt.
  double backoff_s = 0.5;
};

/// Splits "scheme://host[:port]/path" into the origin and the path ("/" if absent).
std::pair<std::string, std::string> split_url(const std::string& url);

/// POSTs `body` as JSON and parses the JSON reply. `bearer` may be empty.
nlohmann::json post_json(const std::string& url, const nlohmann::json& body, const std::string& bearer,
                         const HttpOptions& options);

/// Value of the environment variable, or an empty string.
std::string env_or_empty(const std::string& name);

}  // namespace argcd

// SPDX-License-Identifier: Apache-2.0

#include "argcd/http.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

namespace argcd {

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw HttpError("URL '" + url + "' has no scheme");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string env_or_empty(const std::string& name) {
  if (name.empty()) return {};
  const char* v = std::getenv(name.c_str());
  return v ? std::string(v) : std::string();
}

nlohmann::json post_json(const std::string& url, const nlohmann::json& body, const std::string& bearer,
                         const HttpOptions& options) {
  auto [origin, path] = split_url(url);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (origin.rfind("https://", 0) == 0) throw HttpError("this build has no TLS support; cannot reach " + origin);
#endif
  httplib::Client client(origin);
  const auto timeout = std::chrono::duration<double>(options.timeout_s);
  const auto sec = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout - sec);
  client.set_connection_timeout(sec.count(), usec.count());
  client.set_read_timeout(sec.count(), usec.count());
  client.set_write_timeout(sec.count(), usec.count());
  httplib::Headers headers;
  if (!bearer.empty()) headers.emplace("Authorization", "Bearer " + bearer);

  const std::string payload = body.dump();
  std::string last_error;
  double delay = options.backoff_s;
  for (int attempt = 0; attempt <= options.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
      delay *= 2.0;
    }
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw HttpError(url + " answered HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 300));
    }
    auto reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded()) throw HttpError(url + " returned a body that is not JSON");
    return reply;
  }
  throw HttpError(url + " failed after " + std::to_string(options.retries + 1) + " attempts (" + last_error + ")");
}

}  // namespace argcd

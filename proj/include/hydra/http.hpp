#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

namespace hydra::http {

struct Response {
  int status = 0;
  std::string body;
};

struct Url {
  std::string scheme_host_port;  // "http://localhost:8080"
  std::string path;              // "/v1/chat/completions"
};

/// Splits an absolute http(s) URL; throws ConfigError on anything else.
Url split_url(const std::string& url);

/// POSTs a JSON body. Throws BackendUnavailable on transport failure or
/// timeout; any HTTP status is returned to the caller.
Response post_json(const std::string& url, const std::string& body,
                   const std::vector<std::pair<std::string, std::string>>& headers,
                   std::chrono::milliseconds timeout);

}  // namespace hydra::http

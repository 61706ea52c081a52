#include "hydra/http.hpp"

#include <httplib.h>
#include <fmt/format.h>

#include "hydra/error.hpp"

namespace hydra::http {

Url split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("URL without scheme: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("unsupported URL scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  Url out;
  if (path_start == std::string::npos) {
    out.scheme_host_port = url;
    out.path = "/";
  } else {
    out.scheme_host_port = url.substr(0, path_start);
    out.path = url.substr(path_start);
  }
  return out;
}

Response post_json(const std::string& url, const std::string& body,
                   const std::vector<std::pair<std::string, std::string>>& headers,
                   std::chrono::milliseconds timeout) {
  const Url parts = split_url(url);
  httplib::Client client(parts.scheme_host_port);
  const auto secs = timeout.count() / 1000;
  const auto usecs = (timeout.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = client.Post(parts.path, h, body, "application/json");
  if (!res) {
    throw BackendUnavailable(
        fmt::format("POST {} failed: {}", url, httplib::to_string(res.error())));
  }
  return {res->status, res->body};
}

}  // namespace hydra::http

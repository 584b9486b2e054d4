#include "http_client.hpp"

#include <chrono>

#include <httplib.h>

#include "cdmizer/backend.hpp"

namespace cdmizer {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error("endpoint '" + url + "' is not an absolute http(s) URL");
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw Error("unsupported URL scheme '" + scheme + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

std::string with_default_path(const std::string& url, std::string_view default_path) {
  SplitUrl parts = split_url(url);
  if (parts.path.empty() || parts.path == "/") return parts.origin + std::string(default_path);
  return url;
}

HttpResponse http_post_json(const std::string& url, const std::string& body, const std::string& bearer_token,
                            double timeout_s) {
  const SplitUrl parts = split_url(url);
  httplib::Client client(parts.origin);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(timeout_s));
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                                static_cast<time_t>(timeout.count() % 1000000));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                          static_cast<time_t>(timeout.count() % 1000000));
  client.set_write_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                           static_cast<time_t>(timeout.count() % 1000000));
  httplib::Headers headers;
  if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);

  auto result = client.Post(parts.path.empty() ? "/" : parts.path, headers, body, "application/json");
  if (!result) {
    throw TransportError("request to " + url + " failed: " + httplib::to_string(result.error()));
  }
  return {result->status, result->body};
}

}  // namespace cdmizer

#pragma once

#include <string>
#include <string_view>

namespace cdmizer {

struct HttpResponse {
  int status = 0;
  std::string body;
};

// POSTs a JSON body. Throws TransportError when no HTTP response arrives.
HttpResponse http_post_json(const std::string& url, const std::string& body, const std::string& bearer_token,
                            double timeout_s);

// Appends `default_path` when the URL has no path component.
std::string with_default_path(const std::string& url, std::string_view default_path);

}  // namespace cdmizer

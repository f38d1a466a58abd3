#pragma once

#include <string>

namespace capfuse {

// "http://host:8080/v1/" -> origin "http://host:8080", path "/v1".
struct HttpUrl {
  std::string origin;
  std::string path;
};

inline HttpUrl split_http_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto host_begin = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto slash = url.find('/', host_begin);
  HttpUrl out;
  if (slash == std::string::npos) {
    out.origin = url;
  } else {
    out.origin = url.substr(0, slash);
    out.path = url.substr(slash);
  }
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

}  // namespace capfuse

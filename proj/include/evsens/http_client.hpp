#pragma once

// cpp-httplib backed HttpClient. Kept out of gateway.hpp so that code which
// only replays transcripts does not pull in a network stack.

#include <chrono>
#include <memory>
#include <string>

#include "httplib.h"

#include "evsens/gateway.hpp"

namespace evsens {

class HttplibClient final : public HttpClient {
 public:
  explicit HttplibClient(std::chrono::seconds timeout = std::chrono::seconds(120))
      : timeout_(timeout) {}

  HttpResponse post(const std::string& url, const HttpHeaders& headers,
                    const std::string& body) override {
    // scheme://host[:port]/path
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) return {0, {}, "invalid URL '" + url + "'"};
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string origin = url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(std::chrono::seconds(30));
    client.set_read_timeout(timeout_);
    client.set_write_timeout(std::chrono::seconds(30));

    httplib::Headers h;
    std::string content_type = "application/json";
    for (const auto& [k, v] : headers) {
      if (k == "Content-Type") {
        content_type = v;
      } else {
        h.emplace(k, v);
      }
    }
    auto res = client.Post(path, h, body, content_type);
    if (!res) return {0, {}, httplib::to_string(res.error())};
    return {res->status, res->body, {}};
  }

 private:
  std::chrono::seconds timeout_;
};

inline HttpClientFactory httplib_factory() {
  return [] { return std::make_shared<HttplibClient>(); };
}

}  // namespace evsens

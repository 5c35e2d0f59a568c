// Copyright 2026 The W2S Label Engine Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <regex>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "w2s/error.hpp"

namespace w2s {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

inline Endpoint parse_endpoint(const std::string& url) {
  static const std::regex re(R"(^(http://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw InvalidArgument("unsupported endpoint URL '" + url + "' (http:// only)");
  return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

/// POSTs a JSON body and returns the parsed JSON reply. Each call uses its
/// own connection, so concurrent callers need no locking.
inline nlohmann::json post_json(const std::string& url, const nlohmann::json& body, std::chrono::milliseconds timeout,
                                const std::string& bearer_token = {}) {
  const Endpoint ep = parse_endpoint(url);
  httplib::Client client(ep.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);
  const auto res = client.Post(ep.path, headers, body.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    const bool timed_out = err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout;
    throw TransportError(timed_out ? TransportError::Kind::timeout : TransportError::Kind::connection,
                         url + ": " + httplib::to_string(err));
  }
  if (res->status < 200 || res->status >= 300)
    throw TransportError(TransportError::Kind::http_status, url + ": HTTP " + std::to_string(res->status));
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error&) {
    throw TransportError(TransportError::Kind::bad_body, url + ": response is not JSON");
  }
}

}  // namespace w2s

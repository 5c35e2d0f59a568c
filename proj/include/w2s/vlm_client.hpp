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
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "w2s/config.hpp"
#include "w2s/error.hpp"
#include "w2s/http.hpp"
#include "w2s/image.hpp"

namespace w2s {

enum class Role { system, user, assistant };

inline const char* to_string(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

struct Message {
  Role role = Role::user;
  std::string text;
  std::optional<Bytes> image_png;

  friend bool operator==(const Message&, const Message&) = default;
};

/// Chat-style vision-language backend. The whole conversation is sent on
/// every call; implementations keep no per-conversation state and must be
/// safe to call from several threads.
class VlmClient {
 public:
  virtual ~VlmClient() = default;
  virtual std::string chat(std::span<const Message> messages) const = 0;
};

struct BackendConfig {
  std::string kind = "http";  // "http" or "mock"
  std::string url;
  std::string model;
  std::string token;
  std::chrono::milliseconds timeout{120000};
  double temperature = 0.0;
  int max_tokens = 512;
};

/// Reads a backend .cfg; W2S_VLM_URL and W2S_VLM_TOKEN override the file.
inline BackendConfig load_backend_config(const std::filesystem::path& path) {
  const Config cfg = Config::load(path);
  BackendConfig b;
  b.kind = cfg.get_or("kind", "http");
  b.url = cfg.get_or("url", "");
  b.model = cfg.get_or("model", "");
  b.token = cfg.get_or("token", "");
  b.timeout = std::chrono::milliseconds(static_cast<long long>(cfg.get_double_or("timeout_ms", 120000)));
  b.temperature = cfg.get_double_or("temperature", 0.0);
  b.max_tokens = static_cast<int>(cfg.get_double_or("max_tokens", 512));
  if (const char* url = std::getenv("W2S_VLM_URL"); url && *url) b.url = url;
  if (const char* tok = std::getenv("W2S_VLM_TOKEN"); tok && *tok) b.token = tok;
  if (b.kind == "http" && b.url.empty()) throw InvalidArgument("backend config: url required for kind=http");
  return b;
}

/// Chat-completion request body. Images travel as base64 PNG data URIs
/// inside the message content.
inline nlohmann::json chat_request_body(const BackendConfig& cfg, std::span<const Message> messages) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : messages) {
    nlohmann::json jm{{"role", to_string(m.role)}};
    if (m.image_png) {
      jm["content"] = nlohmann::json::array(
          {{{"type", "image_url"}, {"image_url", {{"url", png_data_uri(*m.image_png)}}}},
           {{"type", "text"}, {"text", m.text}}});
    } else {
      jm["content"] = m.text;
    }
    msgs.push_back(std::move(jm));
  }
  return {{"model", cfg.model},
          {"messages", std::move(msgs)},
          {"temperature", cfg.temperature},
          {"max_tokens", cfg.max_tokens}};
}

class HttpVlmClient : public VlmClient {
 public:
  explicit HttpVlmClient(BackendConfig cfg) : cfg_(std::move(cfg)) { parse_endpoint(cfg_.url); }

  std::string chat(std::span<const Message> messages) const override {
    const nlohmann::json reply = post_json(cfg_.url, chat_request_body(cfg_, messages), cfg_.timeout, cfg_.token);
    try {
      const auto& content = reply.at("choices").at(0).at("message").at("content");
      if (content.is_string()) return content.get<std::string>();
      // Some servers return content parts.
      std::string text;
      for (const auto& part : content)
        if (part.value("type", "") == "text") text += part.value("text", "");
      return text;
    } catch (const nlohmann::json::exception&) {
      throw TransportError(TransportError::Kind::bad_body, cfg_.url + ": no choices[0].message.content");
    }
  }

  const BackendConfig& config() const { return cfg_; }

 private:
  BackendConfig cfg_;
};

}  // namespace w2s

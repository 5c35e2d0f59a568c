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

// Deterministic stand-in for a vision-language backend. Replies are a pure
// function of the last user message (text and image), so the pipeline can
// be run end to end without a model and compared byte for byte.

#pragma once

#include <array>
#include <limits>
#include <regex>
#include <span>
#include <memory>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "w2s/image.hpp"
#include "w2s/rng.hpp"
#include "w2s/vlm_client.hpp"

namespace w2s {

namespace mock {

struct NamedColor {
  const char* name;
  int r, g, b;
};

inline constexpr std::array<NamedColor, 9> kPalette{{{"white", 235, 235, 235},
                                                     {"black", 25, 25, 25},
                                                     {"gray", 128, 128, 128},
                                                     {"red", 200, 35, 35},
                                                     {"green", 45, 140, 50},
                                                     {"blue", 40, 70, 200},
                                                     {"yellow", 225, 210, 45},
                                                     {"orange", 230, 130, 35},
                                                     {"brown", 125, 80, 40}}};

inline constexpr std::array<const char*, 6> kSurroundings{
    "near a road", "beside a building", "next to open ground", "surrounded by vegetation",
    "close to other objects", "along a paved area"};

/// Nearest palette name to the mean colour of the central half of `img`.
inline std::string dominant_color(const Image& img) {
  const int x0 = img.width / 4, y0 = img.height / 4;
  const int x1 = std::max(x0 + 1, img.width - img.width / 4), y1 = std::max(y0 + 1, img.height - img.height / 4);
  double sr = 0, sg = 0, sb = 0;
  long n = 0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const auto* p = img.pixel(x, y);
      sr += p[0];
      sg += p[1];
      sb += p[2];
      ++n;
    }
  sr /= n;
  sg /= n;
  sb /= n;
  const NamedColor* best = &kPalette[0];
  double best_d = std::numeric_limits<double>::max();
  for (const auto& c : kPalette) {
    const double d = (sr - c.r) * (sr - c.r) + (sg - c.g) * (sg - c.g) + (sb - c.b) * (sb - c.b);
    if (d < best_d) {
      best_d = d;
      best = &c;
    }
  }
  return best->name;
}

inline std::string shape_of(const Image& img) {
  const double ar = static_cast<double>(img.width) / img.height;
  if (ar > 1.6 || ar < 1.0 / 1.6) return "elongated";
  if (ar > 1.15 || ar < 1.0 / 1.15) return "rectangular";
  return "compact";
}

inline std::string spaced(std::string slug) {
  for (char& c : slug)
    if (c == '-' || c == '_') c = ' ';
  return slug;
}

inline std::string strip_period(std::string s) {
  while (!s.empty() && (s.back() == '.' || s.back() == ' ')) s.pop_back();
  return s;
}

inline std::string capture(const std::string& text, const std::regex& re) {
  std::smatch m;
  return std::regex_search(text, m, re) ? m[1].str() : std::string();
}

}  // namespace mock

/// Reply for a conversation, keyed on markers in the last user message.
inline std::string mock_reply(std::span<const Message> messages) {
  using namespace mock;
  if (messages.empty()) return "I need a message.";
  const Message& last = messages.back();
  const std::string& t = last.text;
  nlohmann::ordered_json out;
  if (t.find("correctly describe the highlighted object?") != std::string::npos) {
    // Judge prompt: re-derive the attribute from the crop and compare.
    static const std::regex value_re(R"re(attribute '(.*)' correctly)re");
    const std::string value = capture(t, value_re);
    if (!last.image_png) return "No.";
    const std::string_view bytes(reinterpret_cast<const char*>(last.image_png->data()), last.image_png->size());
    if (value == kSurroundings[fnv1a(bytes) % kSurroundings.size()]) return "Yes.";
    const Image img = decode_png(*last.image_png);
    return value == dominant_color(img) || value == shape_of(img) ? "Yes." : "No.";
  }
  if (t.find("Must using the provided Category") != std::string::npos) {
    static const std::regex cat_re(R"re(Category: "([^"]*)" and)re"), size_re(R"re(Size: "([^"]*)" in)re");
    const std::string category = capture(t, cat_re), size = capture(t, size_re);
    std::string color = "[Include if certain]", geometry = "[Include if certain]";
    std::string caption = "A " + size + " " + spaced(category) + ".";
    if (last.image_png) {
      const Image img = decode_png(*last.image_png);
      color = dominant_color(img);
      geometry = shape_of(img);
      caption = "A " + size + " " + color + " " + spaced(category) + (geometry[0] == 'e' ? " with an " : " with a ") + geometry + " outline.";
    }
    out = {{"caption", caption}, {"Category", category}, {"Size", size}, {"Color", color}, {"Geometry", geometry}};
  } else if (t.find("Based on the caption from Step 1:") != std::string::npos) {
    static const std::regex self_re(R"re(Step 1: "(.*)", refine)re");
    const std::string self = capture(t, self_re);
    const std::uint64_t h = last.image_png ? fnv1a(std::string_view(
                                                 reinterpret_cast<const char*>(last.image_png->data()),
                                                 last.image_png->size()))
                                           : fnv1a(t);
    const std::string where = kSurroundings[h % kSurroundings.size()];
    out = {{"caption", strip_period(self) + ", " + where + "."}, {"relative_location", where}};
  } else if (t.find("Absolute Location:") != std::string::npos) {
    static const std::regex pos_re(R"re(Absolute Location: "([^"]*)")re"), rel_re(R"re(Step 2: "(.*)", enhance)re");
    const std::string pos = capture(t, pos_re), rel = capture(t, rel_re);
    out = {{"caption", strip_period(rel) + ", located at the " + pos + " of the image."}, {"absolute_location", pos}};
  } else {
    return "Understood. Please send the first image.";
  }
  return "```json\n" + out.dump(4) + "\n```";
}

class MockVlmClient : public VlmClient {
 public:
  std::string chat(std::span<const Message> messages) const override { return mock_reply(messages); }
};

/// Decodes a chat-completion request body back into messages.
inline std::vector<Message> messages_from_request(const nlohmann::json& body) {
  std::vector<Message> out;
  for (const auto& jm : body.at("messages")) {
    Message m;
    const std::string role = jm.value("role", "user");
    m.role = role == "system" ? Role::system : role == "assistant" ? Role::assistant : Role::user;
    const auto& content = jm.at("content");
    if (content.is_string()) {
      m.text = content.get<std::string>();
    } else {
      for (const auto& part : content) {
        const std::string type = part.value("type", "");
        if (type == "text") {
          m.text += part.value("text", "");
        } else if (type == "image_url") {
          const std::string url = part.at("image_url").at("url").get<std::string>();
          const auto comma = url.find(',');
          if (comma == std::string::npos) throw InvalidArgument("image url is not a data URI");
          m.image_png = base64_decode(std::string_view(url).substr(comma + 1));
        }
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

inline nlohmann::json chat_completion_body(const std::string& text) {
  return {{"object", "chat.completion"},
          {"choices", nlohmann::json::array({{{"index", 0},
                                              {"message", {{"role", "assistant"}, {"content", text}}},
                                              {"finish_reason", "stop"}}})}};
}

/// Backend selected by a config's `kind`.
inline std::unique_ptr<VlmClient> make_vlm_client(const BackendConfig& cfg) {
  if (cfg.kind == "mock") return std::make_unique<MockVlmClient>();
  if (cfg.kind == "http") return std::make_unique<HttpVlmClient>(cfg);
  throw InvalidArgument("backend kind must be http or mock, got '" + cfg.kind + "'");
}

/// OpenAI-style chat-completions endpoint answering with mock_reply.
inline void add_mock_vlm_routes(httplib::Server& server) {
  const auto handler = [](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto msgs = messages_from_request(nlohmann::json::parse(req.body));
      res.set_content(chat_completion_body(mock_reply(msgs)).dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
    }
  };
  server.Post("/v1/chat/completions", handler);
  server.Post("/chat/completions", handler);
}

}  // namespace w2s

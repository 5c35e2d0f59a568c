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

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "w2s/error.hpp"
#include "w2s/prompts.hpp"

namespace w2s {

/// A model reply that does not satisfy the round's output template.
class ResponseError : public Error {
 public:
  enum class Kind { no_json, missing_field, not_string };

  ResponseError(Kind kind, std::string field, const std::string& what)
      : Error(what), kind_(kind), field_(std::move(field)) {}

  Kind kind() const noexcept { return kind_; }
  const std::string& field() const noexcept { return field_; }

 private:
  Kind kind_;
  std::string field_;
};

inline const char* to_string(ResponseError::Kind k) {
  switch (k) {
    case ResponseError::Kind::no_json: return "no_json";
    case ResponseError::Kind::missing_field: return "missing_field";
    case ResponseError::Kind::not_string: return "not_string";
  }
  return "unknown";
}

struct ParsedResponse {
  Round round = Round::intro;
  std::map<std::string, std::string> fields;  // required + present string optionals

  const std::string& at(const std::string& k) const { return fields.at(k); }
  std::optional<std::string> get(const std::string& k) const {
    auto it = fields.find(k);
    return it == fields.end() ? std::nullopt : std::optional(it->second);
  }
};

/// Outcome of parsing: exactly one of `value` and `error` is set.
struct ParseResult {
  std::optional<ParsedResponse> value;
  std::optional<ResponseError> error;

  bool ok() const { return value.has_value(); }
};

namespace detail {

// Parses one JSON value starting at `pos`, ignoring whatever follows it.
inline std::optional<nlohmann::json> parse_object_prefix(std::string_view text, std::size_t pos) {
  nlohmann::json out;
  nlohmann::detail::json_sax_dom_parser<nlohmann::json> sax(out, false);
  bool ok = false;
  try {
    ok = nlohmann::json::sax_parse(text.begin() + static_cast<std::ptrdiff_t>(pos), text.end(), &sax,
                                   nlohmann::json::input_format_t::json, false);
  } catch (const nlohmann::json::exception&) {
    ok = false;
  }
  if (!ok || !out.is_object()) return std::nullopt;
  return out;
}

}  // namespace detail

/// First '{' in `text` that opens a complete JSON object. Code fences and
/// surrounding prose are skipped over.
inline std::optional<nlohmann::json> extract_json_object(std::string_view text) {
  for (std::size_t pos = text.find('{'); pos != std::string_view::npos; pos = text.find('{', pos + 1))
    if (auto obj = detail::parse_object_prefix(text, pos)) return obj;
  return std::nullopt;
}

inline std::size_t word_count(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (unsigned char c : s) {
    const bool space = std::isspace(c) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

inline std::string trim(std::string_view s) {
  auto b = s.begin(), e = s.end();
  while (b != e && std::isspace(static_cast<unsigned char>(*b))) ++b;
  while (e != b && std::isspace(static_cast<unsigned char>(e[-1]))) --e;
  return std::string(b, e);
}

/// Never throws for any input text.
inline ParseResult parse_vlm_response(std::string_view text, const RoundSchema& schema) {
  using K = ResponseError::Kind;
  ParseResult r;
  const auto obj = extract_json_object(text);
  if (!obj) {
    r.error.emplace(K::no_json, "", std::string(to_string(schema.round)) + ": no JSON object in response");
    return r;
  }
  ParsedResponse p;
  p.round = schema.round;
  for (const auto& name : schema.required) {
    auto it = obj->find(name);
    if (it == obj->end() || it->is_null()) {
      r.error.emplace(K::missing_field, name, std::string(to_string(schema.round)) + ": missing field '" + name + "'");
      return r;
    }
    if (!it->is_string()) {
      r.error.emplace(K::not_string, name,
                      std::string(to_string(schema.round)) + ": field '" + name + "' is not a string");
      return r;
    }
    std::string v = trim(it->get_ref<const std::string&>());
    if (v.empty()) {
      r.error.emplace(K::missing_field, name, std::string(to_string(schema.round)) + ": field '" + name + "' is empty");
      return r;
    }
    p.fields.emplace(name, std::move(v));
  }
  for (const auto& name : schema.optional) {
    auto it = obj->find(name);
    if (it != obj->end() && it->is_string()) p.fields.emplace(name, trim(it->get_ref<const std::string&>()));
  }
  r.value = std::move(p);
  return r;
}

/// Color/Geometry values that mean "not determined": empty, an echoed
/// "[...]" template hint, or a stock refusal word.
inline bool is_unknown_attribute(std::string_view v) {
  const std::string t = trim(v);
  if (t.empty() || t.front() == '[') return true;
  std::string low(t);
  std::transform(low.begin(), low.end(), low.begin(), [](unsigned char c) { return std::tolower(c); });
  while (!low.empty() && (low.back() == '.' || low.back() == '!')) low.pop_back();
  static const char* kWords[] = {"unknown", "n/a", "na", "none", "null", "uncertain", "not certain", "unclear",
                                 "not sure", "-"};
  return std::any_of(std::begin(kWords), std::end(kWords), [&](const char* w) { return low == w; });
}

}  // namespace w2s

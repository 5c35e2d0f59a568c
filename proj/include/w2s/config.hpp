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

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "w2s/error.hpp"

namespace w2s {

/// Flat view of an INI-style .cfg file. Keys outside any section live in
/// the "" section. Key order within a section is preserved.
class Config {
 public:
  static Config parse(const std::string& text, const std::string& origin = "<string>") {
    std::istringstream in(text);
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ParseError(origin, e.line(), e.message());
    }
    Config cfg;
    for (const auto& [key, node] : tree) {
      if (node.empty()) {
        cfg.sections_[""].emplace_back(key, node.data());
      } else {
        auto& entries = cfg.sections_[key];
        for (const auto& [k, v] : node) entries.emplace_back(k, v.data());
      }
    }
    return cfg;
  }

  static Config load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
  }

  bool has(const std::string& key, const std::string& section = "") const {
    return find(key, section) != nullptr;
  }

  std::string get(const std::string& key, const std::string& section = "") const {
    if (const auto* v = find(key, section)) return *v;
    throw InvalidArgument("config: missing key '" + qualified(key, section) + "'");
  }

  std::string get_or(const std::string& key, std::string fallback, const std::string& section = "") const {
    if (const auto* v = find(key, section)) return *v;
    return fallback;
  }

  double get_double_or(const std::string& key, double fallback, const std::string& section = "") const {
    const auto* v = find(key, section);
    if (!v) return fallback;
    try {
      return std::stod(*v);
    } catch (const std::exception&) {
      throw InvalidArgument("config: '" + qualified(key, section) + "' is not a number");
    }
  }

  const std::vector<std::pair<std::string, std::string>>& section(const std::string& name) const {
    static const std::vector<std::pair<std::string, std::string>> empty;
    const auto it = sections_.find(name);
    return it == sections_.end() ? empty : it->second;
  }

 private:
  const std::string* find(const std::string& key, const std::string& section) const {
    const auto it = sections_.find(section);
    if (it == sections_.end()) return nullptr;
    for (const auto& [k, v] : it->second)
      if (k == key) return &v;
    return nullptr;
  }

  static std::string qualified(const std::string& key, const std::string& section) {
    return section.empty() ? key : section + "." + key;
  }

  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections_;
};

/// Splits "a, b ,c" into {"a","b","c"}; empty items dropped.
inline std::vector<std::string> split_list(const std::string& text, char sep = ',') {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, sep)) {
    const auto b = item.find_first_not_of(" \t\r\n'\"");
    const auto e = item.find_last_not_of(" \t\r\n'\"");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace w2s

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

// Unified image record format shared by every pipeline stage. One JSON object
// per line:
//
//   {"id":"dior-00012","source":"dior","partition":"train",
//    "image":"/abs/or/relative/path.png","width":800,"height":800,
//    "tile_origin":[0,0],
//    "instances":[{"id":"dior-00012-0","box":[x1,y1,x2,y2],
//                  "category":"airplane","area_ratio":0.0031}]}

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "w2s/error.hpp"
#include "w2s/geometry.hpp"

namespace w2s {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

struct Instance {
  std::string id;
  Box box;
  std::string category;
  double area_ratio = 0;

  friend bool operator==(const Instance&, const Instance&) = default;
};

struct ImageRecord {
  std::string id;
  std::string source;
  std::string partition = "train";  // "train" or "val"
  std::string image;                // path of the pixels this record describes
  int width = 0;
  int height = 0;
  int tile_x = 0;
  int tile_y = 0;
  std::vector<Instance> instances;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

inline void validate(const ImageRecord& r) {
  if (r.id.empty()) throw SchemaError("record id empty");
  if (r.width <= 0 || r.height <= 0) throw SchemaError(r.id + ": non-positive image size");
  if (r.partition != "train" && r.partition != "val")
    throw SchemaError(r.id + ": partition must be train or val");
  for (const auto& in : r.instances) {
    if (!in.box.valid()) throw SchemaError(in.id + ": degenerate box");
    if (!in.box.within(r.width, r.height)) throw SchemaError(in.id + ": box outside image");
    if (in.category.empty()) throw SchemaError(in.id + ": empty category");
    if (!(in.area_ratio > 0 && in.area_ratio <= 1)) throw SchemaError(in.id + ": area_ratio out of (0,1]");
  }
}

inline ordered_json to_json(const Instance& in) {
  ordered_json j;
  j["id"] = in.id;
  j["box"] = {in.box.x1, in.box.y1, in.box.x2, in.box.y2};
  j["category"] = in.category;
  j["area_ratio"] = in.area_ratio;
  return j;
}

inline ordered_json to_json(const ImageRecord& r) {
  ordered_json j;
  j["id"] = r.id;
  j["source"] = r.source;
  j["partition"] = r.partition;
  j["image"] = r.image;
  j["width"] = r.width;
  j["height"] = r.height;
  j["tile_origin"] = {r.tile_x, r.tile_y};
  j["instances"] = ordered_json::array();
  for (const auto& in : r.instances) j["instances"].push_back(to_json(in));
  return j;
}

template <typename Json>
Instance instance_from_json(const Json& j) {
  Instance in;
  in.id = j.at("id").template get<std::string>();
  in.box = box_from_json(json(j.at("box")));
  in.category = j.at("category").template get<std::string>();
  in.area_ratio = j.at("area_ratio").template get<double>();
  return in;
}

template <typename Json>
ImageRecord record_from_json(const Json& j) {
  try {
    ImageRecord r;
    r.id = j.at("id").template get<std::string>();
    r.source = j.at("source").template get<std::string>();
    r.partition = j.value("partition", std::string("train"));
    r.image = j.value("image", std::string());
    r.width = j.at("width").template get<int>();
    r.height = j.at("height").template get<int>();
    if (j.contains("tile_origin")) {
      r.tile_x = j["tile_origin"].at(0).template get<int>();
      r.tile_y = j["tile_origin"].at(1).template get<int>();
    }
    for (const auto& ij : j.at("instances")) r.instances.push_back(instance_from_json(ij));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("record: ") + e.what());
  }
}

/// Reads a JSON Lines file; blank lines are skipped. Errors carry file+line.
inline std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
  }
  return out;
}

template <typename Range>
void write_jsonl(const std::filesystem::path& path, const Range& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& row : rows) out << row.dump() << '\n';
  if (!out) throw Error("short write to " + path.string());
}

/// `path` is either a single .jsonl file or a directory whose *.jsonl files
/// are read in lexicographic order.
inline std::vector<std::filesystem::path> jsonl_inputs(const std::filesystem::path& path,
                                                       const std::string& preferred = {}) {
  namespace fs = std::filesystem;
  if (fs::is_regular_file(path)) return {path};
  if (!fs::is_directory(path)) throw Error("no such file or directory: " + path.string());
  if (!preferred.empty() && fs::is_regular_file(path / preferred)) return {path / preferred};
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(path))
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

inline std::vector<ImageRecord> read_records(const std::filesystem::path& path) {
  std::vector<ImageRecord> out;
  for (const auto& file : jsonl_inputs(path))
    for (const auto& j : read_jsonl(file)) out.push_back(record_from_json(j));
  return out;
}

inline void write_records(const std::filesystem::path& path, const std::vector<ImageRecord>& records) {
  std::vector<ordered_json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) {
    validate(r);
    rows.push_back(to_json(r));
  }
  write_jsonl(path, rows);
}

/// Resolve a record's image path relative to the file it was read from.
inline std::filesystem::path resolve_image(const ImageRecord& r, const std::filesystem::path& base_dir) {
  std::filesystem::path p(r.image);
  return p.is_absolute() ? p : base_dir / p;
}

}  // namespace w2s

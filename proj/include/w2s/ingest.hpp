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

// Source annotation dialects, category canonicalization and tiling.

#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <nlohmann/json.hpp>

#include "w2s/config.hpp"
#include "w2s/error.hpp"
#include "w2s/geometry.hpp"
#include "w2s/image.hpp"
#include "w2s/parallel.hpp"
#include "w2s/records.hpp"

namespace w2s {

namespace fs = std::filesystem;

enum class Dialect { voc_xml, coco_json, dota_txt, plain_tsv };

inline Dialect parse_dialect(std::string_view s) {
  if (s == "voc-xml") return Dialect::voc_xml;
  if (s == "coco-json") return Dialect::coco_json;
  if (s == "dota-txt") return Dialect::dota_txt;
  if (s == "plain-tsv") return Dialect::plain_tsv;
  throw InvalidArgument("unknown annotation dialect '" + std::string(s) + "'");
}

/// Trim, lowercase, and join whitespace-separated words with hyphens.
/// "  Ground Track Field " -> "ground-track-field".
inline std::string slugify(std::string_view raw) {
  std::string out;
  bool pending_sep = false;
  for (unsigned char c : raw) {
    if (std::isspace(c)) {
      pending_sep = !out.empty();
      continue;
    }
    if (pending_sep) out.push_back('-');
    pending_sep = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

/// Raw label (normalized) -> canonical category slug.
class CategoryMap {
 public:
  CategoryMap() = default;
  CategoryMap(std::initializer_list<std::pair<std::string, std::string>> entries) {
    for (const auto& [raw, canonical] : entries) add(raw, canonical);
  }

  void add(std::string_view raw, std::string_view canonical) {
    const std::string key = slugify(raw);
    const std::string value = slugify(canonical);
    if (key.empty() || value.empty()) throw InvalidArgument("category map: empty entry");
    entries_[key] = value;
  }

  const std::string* find(const std::string& normalized) const {
    const auto it = entries_.find(normalized);
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::set<std::string> canonical_values() const {
    std::set<std::string> out;
    for (const auto& [k, v] : entries_) out.insert(v);
    return out;
  }

  bool empty() const { return entries_.empty(); }

 private:
  std::map<std::string, std::string> entries_;
};

inline std::string normalize_category(std::string_view raw, const CategoryMap& map) {
  const std::string key = slugify(raw);
  if (key.empty()) throw InvalidArgument("empty category");
  if (const auto* canonical = map.find(key)) return *canonical;
  throw MappingError(key);
}

struct SourceDatasetDescriptor {
  std::string name;
  Dialect dialect = Dialect::plain_tsv;
  CategoryMap category_map;
  fs::path image_root;
  fs::path annotations;  // file or directory
  std::string partition = "train";
};

/// Loads a descriptor .cfg. Relative paths resolve against the cfg's directory.
///
///   name = dior
///   dialect = voc-xml
///   image_root = images
///   annotations = annotations
///   partition = train
///   [categories]
///   Ground Track Field = ground-track-field
inline SourceDatasetDescriptor load_descriptor(const fs::path& cfg_path) {
  const Config cfg = Config::load(cfg_path);
  const fs::path base = cfg_path.parent_path();
  SourceDatasetDescriptor d;
  d.name = cfg.get("name");
  if (d.name.empty() || d.name.find_first_of("/\\ ") != std::string::npos)
    throw InvalidArgument("descriptor name must be a non-empty token");
  d.dialect = parse_dialect(cfg.get("dialect"));
  d.image_root = base / cfg.get_or("image_root", ".");
  d.annotations = base / cfg.get("annotations");
  d.partition = cfg.get_or("partition", "train");
  if (d.partition != "train" && d.partition != "val")
    throw InvalidArgument("descriptor partition must be train or val");
  for (const auto& [raw, canonical] : cfg.section("categories")) d.category_map.add(raw, canonical);
  if (d.category_map.empty()) throw InvalidArgument("descriptor has no [categories] entries");
  return d;
}

/// One annotation file's bytes plus a name used for errors and image lookup.
struct SourceFile {
  std::string name;
  std::string content;
};

/// Resolved pixel file for an annotation's image reference.
struct ImageInfo {
  std::string path;
  int width = 0;
  int height = 0;
};

/// Maps an image reference (file name or stem) to a file and its size.
using ImageLocator = std::function<ImageInfo(const std::string& reference)>;

/// Looks for `reference` under `root`, trying common extensions when the
/// reference has none or does not exist as given.
inline ImageLocator directory_locator(const fs::path& root) {
  return [root](const std::string& reference) {
    std::vector<fs::path> candidates{root / reference};
    for (const char* ext : {".png", ".jpg", ".jpeg", ".PNG", ".JPG"})
      candidates.push_back(root / (fs::path(reference).stem().string() + ext));
    for (const auto& p : candidates) {
      if (fs::is_regular_file(p)) {
        const auto [w, h] = probe_image_size(p);
        return ImageInfo{p.string(), w, h};
      }
    }
    throw Error("image '" + reference + "' not found under " + root.string());
  };
}

struct ParseStats {
  std::size_t dropped_boxes = 0;  // fully outside the image after clipping
};

namespace detail {

inline std::string sanitize_id(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c == '/' || c == '\\' || std::isspace(static_cast<unsigned char>(c))) c = '_';
  return out;
}

class RecordBuilder {
 public:
  RecordBuilder(const SourceDatasetDescriptor& d, ParseStats* stats) : d_(d), stats_(stats) {}

  ImageRecord start(std::string_view stem, const ImageInfo& info) const {
    ImageRecord r;
    r.id = d_.name + "-" + sanitize_id(stem);
    r.source = d_.name;
    r.partition = d_.partition;
    r.image = info.path;
    r.width = info.width;
    r.height = info.height;
    return r;
  }

  /// Adds a raw box; throws ParseError on inverted boxes and clips boxes
  /// that extend past the image.
  void add(ImageRecord& r, Box raw, std::string_view raw_category, const std::string& file,
           std::size_t line) const {
    if (!raw.valid()) throw ParseError(file, line, "degenerate or non-finite box");
    std::string category;
    try {
      category = normalize_category(raw_category, d_.category_map);
    } catch (const InvalidArgument& e) {
      throw ParseError(file, line, e.what());
    }
    const Box b = clip(raw, r.width, r.height);
    if (!b.valid()) {
      if (stats_) ++stats_->dropped_boxes;
      return;
    }
    Instance in;
    in.id = r.id + "-" + std::to_string(r.instances.size());
    in.box = b;
    in.category = std::move(category);
    in.area_ratio = b.area() / (static_cast<double>(r.width) * r.height);
    r.instances.push_back(std::move(in));
  }

 private:
  const SourceDatasetDescriptor& d_;
  ParseStats* stats_;
};

inline std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + offset, '\n'));
}

inline double to_number(const std::string& token, const std::string& file, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw ParseError(file, line, "expected a number, got '" + token + "'");
  }
}

inline std::vector<std::string> tokens(const std::string& line, char sep) {
  std::vector<std::string> out;
  if (sep == ' ') {
    std::istringstream in(line);
    for (std::string t; in >> t;) out.push_back(t);
  } else {
    std::string t;
    std::istringstream in(line);
    while (std::getline(in, t, sep)) {
      while (!t.empty() && (t.back() == '\r' || t.back() == ' ')) t.pop_back();
      out.push_back(t);
    }
  }
  return out;
}

inline std::vector<ImageRecord> parse_voc(const SourceFile& f, const RecordBuilder& rb,
                                          const ImageLocator& locate) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(f.content);
  try {
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError(f.name, e.line(), e.message());
  }
  const auto root = tree.get_child_optional("annotation");
  if (!root) throw ParseError(f.name, 0, "missing <annotation> root");
  const std::string filename = root->get<std::string>("filename", fs::path(f.name).stem().string());
  ImageInfo info;
  const int w = root->get<int>("size.width", 0);
  const int h = root->get<int>("size.height", 0);
  if (w > 0 && h > 0) {
    info = locate ? locate(filename) : ImageInfo{filename, w, h};
    info.width = w;
    info.height = h;
  } else {
    if (!locate) throw ParseError(f.name, 0, "no <size> and no image locator");
    info = locate(filename);
  }
  ImageRecord r = rb.start(fs::path(filename).stem().string(), info);
  for (const auto& [tag, obj] : *root) {
    if (tag != "object") continue;
    try {
      const Box b{obj.get<double>("bndbox.xmin"), obj.get<double>("bndbox.ymin"),
                  obj.get<double>("bndbox.xmax"), obj.get<double>("bndbox.ymax")};
      rb.add(r, b, obj.get<std::string>("name"), f.name, 0);
    } catch (const pt::ptree_error& e) {
      throw ParseError(f.name, 0, std::string("<object>: ") + e.what());
    }
  }
  return {std::move(r)};
}

inline std::vector<ImageRecord> parse_coco(const SourceFile& f, const RecordBuilder& rb,
                                           const ImageLocator& locate) {
  json doc;
  try {
    doc = json::parse(f.content);
  } catch (const json::parse_error& e) {
    throw ParseError(f.name, line_of_offset(f.content, e.byte), e.what());
  }
  try {
    std::map<long long, std::string> category_names;
    for (const auto& c : doc.at("categories"))
      category_names[c.at("id").get<long long>()] = c.at("name").get<std::string>();

    std::vector<ImageRecord> records;
    std::map<long long, std::size_t> by_id;
    for (const auto& im : doc.at("images")) {
      const std::string file_name = im.at("file_name").get<std::string>();
      ImageInfo info;
      const int w = im.value("width", 0);
      const int h = im.value("height", 0);
      if (w > 0 && h > 0) {
        info = locate ? locate(file_name) : ImageInfo{file_name, w, h};
        info.width = w;
        info.height = h;
      } else {
        if (!locate) throw ParseError(f.name, 0, "image without size and no image locator");
        info = locate(file_name);
      }
      by_id[im.at("id").get<long long>()] = records.size();
      records.push_back(rb.start(fs::path(file_name).stem().string(), info));
    }
    for (const auto& a : doc.value("annotations", json::array())) {
      const auto img = by_id.find(a.at("image_id").get<long long>());
      if (img == by_id.end()) throw ParseError(f.name, 0, "annotation references unknown image_id");
      const auto cat = category_names.find(a.at("category_id").get<long long>());
      if (cat == category_names.end()) throw ParseError(f.name, 0, "annotation references unknown category_id");
      const auto& bb = a.at("bbox");
      const double x = bb.at(0).get<double>(), y = bb.at(1).get<double>();
      const double w = bb.at(2).get<double>(), h = bb.at(3).get<double>();
      rb.add(records[img->second], Box{x, y, x + w, y + h}, cat->second, f.name, 0);
    }
    return records;
  } catch (const json::exception& e) {
    throw ParseError(f.name, 0, e.what());
  }
}

inline std::vector<ImageRecord> parse_dota(const SourceFile& f, const RecordBuilder& rb,
                                           const ImageLocator& locate) {
  if (!locate) throw ParseError(f.name, 0, "dota-txt requires an image locator for image sizes");
  const std::string stem = fs::path(f.name).stem().string();
  ImageRecord r = rb.start(stem, locate(stem));
  std::istringstream in(f.content);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = tokens(line, ' ');
    if (t.empty()) continue;
    if (t[0].starts_with("imagesource:") || t[0].starts_with("gsd:")) continue;
    if (t.size() < 9 || t.size() > 10)
      throw ParseError(f.name, lineno, "expected 8 coordinates, a category and an optional difficulty flag");
    Box hull{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
             -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (int k = 0; k < 4; ++k) {
      const double x = to_number(t[2 * k], f.name, lineno);
      const double y = to_number(t[2 * k + 1], f.name, lineno);
      hull.x1 = std::min(hull.x1, x);
      hull.y1 = std::min(hull.y1, y);
      hull.x2 = std::max(hull.x2, x);
      hull.y2 = std::max(hull.y2, y);
    }
    rb.add(r, hull, t[8], f.name, lineno);
  }
  return {std::move(r)};
}

// plain-tsv: image<TAB>width<TAB>height[<TAB>x1<TAB>y1<TAB>x2<TAB>y2<TAB>category]
// One row per box; a three-column row declares an image without boxes.
// '#' comments and a header row starting with "image" are skipped.
inline std::vector<ImageRecord> parse_tsv(const SourceFile& f, const RecordBuilder& rb,
                                          const ImageLocator& locate) {
  std::vector<ImageRecord> records;
  std::map<std::string, std::size_t> by_image;
  std::istringstream in(f.content);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto t = tokens(line, '\t');
    if (lineno == 1 && !t.empty() && t[0] == "image") continue;
    if (t.size() != 3 && t.size() != 8) throw ParseError(f.name, lineno, "expected 3 or 8 tab-separated columns");
    auto [it, inserted] = by_image.try_emplace(t[0], records.size());
    if (inserted) {
      ImageInfo info = locate ? locate(t[0]) : ImageInfo{t[0], 0, 0};
      info.width = static_cast<int>(to_number(t[1], f.name, lineno));
      info.height = static_cast<int>(to_number(t[2], f.name, lineno));
      if (info.width <= 0 || info.height <= 0) throw ParseError(f.name, lineno, "non-positive image size");
      records.push_back(rb.start(fs::path(t[0]).stem().string(), info));
    }
    if (t.size() == 8) {
      const Box b{to_number(t[3], f.name, lineno), to_number(t[4], f.name, lineno),
                  to_number(t[5], f.name, lineno), to_number(t[6], f.name, lineno)};
      rb.add(records[it->second], b, t[7], f.name, lineno);
    }
  }
  return records;
}

}  // namespace detail

/// Parses annotation files of one source dataset into unified records.
/// Boxes are converted to (x1,y1,x2,y2) pixels; rotated quads become their
/// axis-aligned hull.
inline std::vector<ImageRecord> parse_source_annotations(const SourceDatasetDescriptor& descriptor,
                                                         const std::vector<SourceFile>& files,
                                                         const ImageLocator& locate,
                                                         ParseStats* stats = nullptr) {
  const detail::RecordBuilder rb(descriptor, stats);
  std::vector<ImageRecord> out;
  for (const auto& f : files) {
    std::vector<ImageRecord> part;
    switch (descriptor.dialect) {
      case Dialect::voc_xml: part = detail::parse_voc(f, rb, locate); break;
      case Dialect::coco_json: part = detail::parse_coco(f, rb, locate); break;
      case Dialect::dota_txt: part = detail::parse_dota(f, rb, locate); break;
      case Dialect::plain_tsv: part = detail::parse_tsv(f, rb, locate); break;
    }
    for (auto& r : part) out.push_back(std::move(r));
  }
  std::set<std::string> seen;
  for (const auto& r : out)
    if (!seen.insert(r.id).second) throw ParseError(r.id, 0, "duplicate image id within source");
  return out;
}

/// Tile origins along one axis: stride tile-overlap, last origin clamped so
/// the tile ends at the image edge.
inline std::vector<int> tile_origins(int dim, int tile, int overlap) {
  if (dim <= tile) return {0};
  std::vector<int> out;
  const int stride = tile - overlap;
  for (int o = 0;; o += stride) {
    if (o + tile >= dim) {
      if (out.empty() || out.back() != dim - tile) out.push_back(dim - tile);
      break;
    }
    out.push_back(o);
  }
  return out;
}

struct TileOptions {
  int tile = 1024;
  int overlap = 200;
  double min_visible = 0.5;
};

/// Splits a record into tiles of at most tile x tile pixels. A box is kept
/// in a tile iff its clipped area is at least min_visible of its original
/// area. A record that already fits is returned unchanged.
inline std::vector<ImageRecord> tile_image(const ImageRecord& record, const TileOptions& opt = {}) {
  if (!(opt.tile > opt.overlap && opt.overlap >= 0))
    throw InvalidArgument("tile_image: require tile > overlap >= 0");
  if (!(opt.min_visible > 0 && opt.min_visible <= 1))
    throw InvalidArgument("tile_image: require 0 < min_visible <= 1");
  if (record.width <= opt.tile && record.height <= opt.tile) return {record};

  const int tw = std::min(opt.tile, record.width);
  const int th = std::min(opt.tile, record.height);
  std::vector<ImageRecord> out;
  for (int oy : tile_origins(record.height, opt.tile, opt.overlap)) {
    for (int ox : tile_origins(record.width, opt.tile, opt.overlap)) {
      ImageRecord t;
      t.id = record.id + "_" + std::to_string(record.tile_x + ox) + "_" + std::to_string(record.tile_y + oy);
      t.source = record.source;
      t.partition = record.partition;
      t.image = record.image;
      t.width = tw;
      t.height = th;
      t.tile_x = record.tile_x + ox;
      t.tile_y = record.tile_y + oy;
      const Box extent{static_cast<double>(ox), static_cast<double>(oy), static_cast<double>(ox + tw),
                       static_cast<double>(oy + th)};
      for (const auto& in : record.instances) {
        const double visible = intersection_area(in.box, extent);
        if (visible <= 0 || visible < opt.min_visible * in.box.area()) continue;
        const Box local = clip(translate(in.box, -ox, -oy), tw, th);
        Instance ti;
        ti.id = t.id + "-" + std::to_string(t.instances.size());
        ti.box = local;
        ti.category = in.category;
        ti.area_ratio = local.area() / (static_cast<double>(tw) * th);
        t.instances.push_back(std::move(ti));
      }
      out.push_back(std::move(t));
    }
  }
  return out;
}

inline bool record_order(const ImageRecord& a, const ImageRecord& b) {
  return std::tie(a.source, a.id, a.tile_y, a.tile_x) < std::tie(b.source, b.id, b.tile_y, b.tile_x);
}

/// Path of `target` relative to `from_dir`, using '/' separators.
inline std::string relative_path(const fs::path& target, const fs::path& from_dir) {
  return fs::weakly_canonical(fs::absolute(target))
      .lexically_relative(fs::weakly_canonical(fs::absolute(from_dir)))
      .generic_string();
}

struct IngestSummary {
  std::size_t images = 0;
  std::size_t records = 0;
  std::size_t instances = 0;
  std::size_t dropped_boxes = 0;
};

/// Reads every annotation file of `descriptor`, tiles the images and writes
/// `<out_dir>/<name>.jsonl` plus tile PNGs under `<out_dir>/tiles/<name>/`.
/// Image paths in the output are relative to `out_dir`.
inline IngestSummary ingest_dataset(const SourceDatasetDescriptor& descriptor, const fs::path& out_dir,
                                    const TileOptions& opt = {}, std::size_t concurrency = 1) {
  std::vector<fs::path> files;
  if (fs::is_directory(descriptor.annotations)) {
    for (const auto& e : fs::directory_iterator(descriptor.annotations))
      if (e.is_regular_file()) files.push_back(e.path());
  } else {
    files.push_back(descriptor.annotations);
  }
  std::sort(files.begin(), files.end());
  std::vector<SourceFile> sources;
  for (const auto& p : files) {
    const Bytes bytes = read_file_bytes(p);
    sources.push_back({p.string(), std::string(bytes.begin(), bytes.end())});
  }

  ParseStats stats;
  std::vector<ImageRecord> parsed =
      parse_source_annotations(descriptor, sources, directory_locator(descriptor.image_root), &stats);
  std::sort(parsed.begin(), parsed.end(), record_order);

  fs::create_directories(out_dir);
  const fs::path tile_dir = out_dir / "tiles" / descriptor.name;
  auto tiled = parallel_map<std::vector<ImageRecord>>(parsed.size(), concurrency, [&](std::size_t i) {
    std::vector<ImageRecord> tiles = tile_image(parsed[i], opt);
    if (tiles.size() == 1 && tiles[0].id == parsed[i].id) {
      tiles[0].image = relative_path(parsed[i].image, out_dir);
      return tiles;
    }
    const Image full = load_image(parsed[i].image);
    if (full.width != parsed[i].width || full.height != parsed[i].height)
      throw Error(parsed[i].id + ": annotation size disagrees with image pixels");
    fs::create_directories(tile_dir);
    for (auto& t : tiles) {
      const fs::path dst = tile_dir / (t.id + ".png");
      save_png(crop(full, {t.tile_x, t.tile_y, t.width, t.height}), dst);
      t.image = relative_path(dst, out_dir);
    }
    return tiles;
  });

  std::vector<ImageRecord> records;
  for (auto& group : tiled)
    for (auto& t : group) records.push_back(std::move(t));
  std::sort(records.begin(), records.end(), record_order);
  write_records(out_dir / (descriptor.name + ".jsonl"), records);

  IngestSummary s;
  s.images = parsed.size();
  s.records = records.size();
  for (const auto& r : records) s.instances += r.instances.size();
  s.dropped_boxes = stats.dropped_boxes;
  return s;
}

}  // namespace w2s

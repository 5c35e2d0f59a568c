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

// Rule-based attribute priors and the two crops shown to the annotator:
// the padded instance crop and the merged foreground region.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "w2s/error.hpp"
#include "w2s/geometry.hpp"
#include "w2s/image.hpp"
#include "w2s/ingest.hpp"
#include "w2s/parallel.hpp"
#include "w2s/records.hpp"

namespace w2s {

enum class SizeClass { tiny, small, medium, big, large };

inline constexpr std::array<std::string_view, 5> kSizeNames{"tiny", "small", "medium", "big", "large"};

inline std::string_view to_string(SizeClass s) { return kSizeNames[static_cast<int>(s)]; }

/// Upper bounds of tiny, small, medium and big as image-area ratios.
struct SizeThresholds {
  std::array<double, 4> bounds{0.0005, 0.001, 0.01, 0.2};

  void check() const {
    for (std::size_t i = 0; i < bounds.size(); ++i) {
      if (!(bounds[i] > 0 && bounds[i] < 1)) throw InvalidArgument("size thresholds must lie in (0,1)");
      if (i > 0 && !(bounds[i] > bounds[i - 1])) throw InvalidArgument("size thresholds must increase");
    }
  }
};

/// Half-open lookup: tiny [0,t1), small [t1,t2), medium [t2,t3), big [t3,t4),
/// large [t4,1].
inline SizeClass classify_size(double area_ratio, const SizeThresholds& t = {}) {
  if (!(area_ratio > 0 && area_ratio <= 1)) throw InvalidArgument("area ratio outside (0,1]");
  const auto it = std::upper_bound(t.bounds.begin(), t.bounds.end(), area_ratio);
  return static_cast<SizeClass>(it - t.bounds.begin());
}

inline constexpr std::array<std::string_view, 5> kHorizontalLabels{"Far Left", "Left", "Center", "Right",
                                                                   "Far Right"};
inline constexpr std::array<std::string_view, 5> kVerticalLabels{"Top", "Upper Middle", "Middle", "Lower Middle",
                                                                 "Bottom"};

/// Cell of the 5x5 grid holding a box center.
struct GridPosition {
  int column = 0;  // 0 = Far Left
  int row = 0;     // 0 = Top

  std::string label() const {
    return std::string(kHorizontalLabels[column]) + "-" + std::string(kVerticalLabels[row]);
  }

  friend bool operator==(const GridPosition&, const GridPosition&) = default;
};

inline GridPosition classify_absolute_position(const Box& box, double image_w, double image_h) {
  if (!box.valid()) throw InvalidArgument("degenerate box");
  if (!(image_w > 0 && image_h > 0)) throw InvalidArgument("non-positive image size");
  const auto cell = [](double c, double extent) {
    return std::clamp(static_cast<int>(std::floor(5.0 * c / extent)), 0, 4);
  };
  return {cell(box.center_x(), image_w), cell(box.center_y(), image_h)};
}

/// Pixel rectangle of `box` grown by `pad` x its width/height per side and
/// clamped to the image.
inline PixelRect instance_crop_rect(const Box& box, int image_w, int image_h, double pad = 0.1) {
  if (!box.valid()) throw InvalidArgument("zero-area box");
  const Box grown{box.x1 - pad * box.width(), box.y1 - pad * box.height(), box.x2 + pad * box.width(),
                  box.y2 + pad * box.height()};
  const PixelRect r = covering_pixels(grown, image_w, image_h);
  if (r.w <= 0 || r.h <= 0) throw InvalidArgument("box outside image");
  return r;
}

inline Image crop_instance_region(const Image& image, const Box& box, double pad = 0.1) {
  return crop(image, instance_crop_rect(box, image.width, image.height, pad));
}

/// Linear expansion factor per axis for an instance of the given area ratio.
/// Smaller objects receive more surrounding context.
inline double default_scale_factor(double area_ratio) {
  switch (classify_size(std::clamp(area_ratio, 1e-12, 1.0))) {
    case SizeClass::tiny: return 4.0;
    case SizeClass::small: return 3.0;
    case SizeClass::medium: return 2.0;
    case SizeClass::big: return 1.5;
    case SizeClass::large: return 1.2;
  }
  return 1.0;
}

using ScaleFn = std::function<double(double area_ratio)>;

struct ForegroundRegion {
  std::string id;
  Box box;
  std::vector<std::string> member_instances;
};

/// Expanded box of every instance, clamped to the image.
inline std::vector<Box> expanded_boxes(std::span<const Instance> instances, double image_w, double image_h,
                                       const ScaleFn& scale_fn) {
  std::vector<Box> out;
  out.reserve(instances.size());
  const double image_area = image_w * image_h;
  for (const auto& in : instances) {
    if (!in.box.valid() || !in.box.within(image_w, image_h))
      throw InvalidArgument(in.id + ": box outside image");
    const double s = scale_fn(in.box.area() / image_area);
    out.push_back(clip(expand_about_center(in.box, s), image_w, image_h));
  }
  return out;
}

/// Expands each box about its center by scale_fn(area ratio), then merges
/// overlapping expanded boxes into their hull until no two regions overlap.
/// Regions are ordered by their first member; members keep input order.
inline std::vector<ForegroundRegion> extract_foreground_regions(std::span<const Instance> instances, double image_w,
                                                                double image_h,
                                                                const ScaleFn& scale_fn = default_scale_factor) {
  const std::vector<Box> expanded = expanded_boxes(instances, image_w, image_h, scale_fn);
  struct Group {
    Box box;
    std::vector<std::size_t> members;
  };
  std::vector<Group> groups;
  std::vector<bool> merged(expanded.size(), false);

  // Greedy sweep: each unmerged box absorbs every unmerged box that touches
  // its growing region.
  for (std::size_t i = 0; i < expanded.size(); ++i) {
    if (merged[i]) continue;
    merged[i] = true;
    Group g{expanded[i], {i}};
    for (bool grew = true; grew;) {
      grew = false;
      for (std::size_t j = 0; j < expanded.size(); ++j) {
        if (!merged[j] && overlaps(g.box, expanded[j])) {
          g.box = hull(g.box, expanded[j]);
          g.members.push_back(j);
          merged[j] = true;
          grew = true;
        }
      }
    }
    groups.push_back(std::move(g));
  }

  // A later hull can still reach into an earlier one; merge regions until
  // they are pairwise disjoint.
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t a = 0; a < groups.size() && !changed; ++a) {
      for (std::size_t b = a + 1; b < groups.size(); ++b) {
        if (overlaps(groups[a].box, groups[b].box)) {
          groups[a].box = hull(groups[a].box, groups[b].box);
          groups[a].members.insert(groups[a].members.end(), groups[b].members.begin(), groups[b].members.end());
          groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(b));
          changed = true;
          break;
        }
      }
    }
  }

  for (auto& g : groups) std::sort(g.members.begin(), g.members.end());
  std::sort(groups.begin(), groups.end(), [](const Group& x, const Group& y) { return x.members[0] < y.members[0]; });

  std::vector<ForegroundRegion> out;
  for (const auto& g : groups) {
    ForegroundRegion r;
    r.box = g.box;
    for (std::size_t m : g.members) r.member_instances.push_back(instances[m].id);
    out.push_back(std::move(r));
  }
  return out;
}

/// Stroke width used for the target highlight of a crop.
inline int highlight_stroke(int crop_w, int crop_h) {
  const int short_side = std::min(crop_w, crop_h);
  return std::min(std::max(2, static_cast<int>(std::lround(0.01 * short_side))), std::max(1, short_side));
}

/// Pure red rectangle around `target` (crop coordinates). The stroke sits
/// just outside the box and is pushed inward where the box is flush with a
/// crop edge, so it is always fully visible. Pixels off the stroke are
/// untouched.
inline Image render_highlight(const Image& crop_img, const Box& target) {
  Image out = crop_img;
  const int W = out.width, H = out.height;
  const int sw = std::min({highlight_stroke(W, H), W, H});
  const PixelRect t = covering_pixels(target, W, H);
  const int lx = std::clamp(t.x - sw, 0, W - sw);
  const int rx = std::clamp(t.x + t.w, 0, W - sw);
  const int ty = std::clamp(t.y - sw, 0, H - sw);
  const int by = std::clamp(t.y + t.h, 0, H - sw);
  const auto paint = [&](int x0, int y0, int x1, int y1) {
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) {
        std::uint8_t* p = out.pixel(x, y);
        p[0] = 255;
        p[1] = 0;
        p[2] = 0;
      }
  };
  paint(lx, ty, rx + sw, ty + sw);  // top
  paint(lx, by, rx + sw, by + sw);  // bottom
  paint(lx, ty, lx + sw, by + sw);  // left
  paint(rx, ty, rx + sw, by + sw);  // right
  return out;
}

// ---------------------------------------------------------------------------
// Sidecar records

/// Priors and crop references for one instance.
struct InstancePrep {
  std::string id;
  SizeClass size = SizeClass::tiny;
  GridPosition position;
  std::string self_crop;  // relative to the sidecar directory
  std::string region;
  Box box_in_region;
};

struct PreprocessedRecord {
  ImageRecord record;
  std::vector<ForegroundRegion> regions;
  std::vector<std::string> region_crops;  // parallel to regions
  std::vector<InstancePrep> instances;    // parallel to record.instances
};

inline ordered_json to_json(const PreprocessedRecord& p) {
  ordered_json j;
  j["record"] = to_json(p.record);
  j["regions"] = ordered_json::array();
  for (std::size_t i = 0; i < p.regions.size(); ++i) {
    const auto& r = p.regions[i];
    j["regions"].push_back({{"id", r.id},
                            {"box", {r.box.x1, r.box.y1, r.box.x2, r.box.y2}},
                            {"members", r.member_instances},
                            {"crop", p.region_crops.at(i)}});
  }
  j["instances"] = ordered_json::array();
  for (const auto& in : p.instances) {
    const Box& b = in.box_in_region;
    j["instances"].push_back({{"id", in.id},
                              {"size", to_string(in.size)},
                              {"position", in.position.label()},
                              {"grid", {in.position.column, in.position.row}},
                              {"self_crop", in.self_crop},
                              {"region", in.region},
                              {"box_in_region", {b.x1, b.y1, b.x2, b.y2}}});
  }
  return j;
}

inline SizeClass parse_size_class(std::string_view s) {
  for (std::size_t i = 0; i < kSizeNames.size(); ++i)
    if (kSizeNames[i] == s) return static_cast<SizeClass>(i);
  throw SchemaError("unknown size class '" + std::string(s) + "'");
}

inline PreprocessedRecord preprocessed_from_json(const json& j) {
  try {
    PreprocessedRecord p;
    p.record = record_from_json(j.at("record"));
    for (const auto& r : j.at("regions")) {
      ForegroundRegion fr;
      fr.id = r.at("id").get<std::string>();
      fr.box = box_from_json(r.at("box"));
      fr.member_instances = r.at("members").get<std::vector<std::string>>();
      p.regions.push_back(std::move(fr));
      p.region_crops.push_back(r.at("crop").get<std::string>());
    }
    for (const auto& i : j.at("instances")) {
      InstancePrep ip;
      ip.id = i.at("id").get<std::string>();
      ip.size = parse_size_class(i.at("size").get<std::string>());
      ip.position = {i.at("grid").at(0).get<int>(), i.at("grid").at(1).get<int>()};
      ip.self_crop = i.at("self_crop").get<std::string>();
      ip.region = i.at("region").get<std::string>();
      ip.box_in_region = box_from_json(i.at("box_in_region"));
      p.instances.push_back(std::move(ip));
    }
    return p;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("preprocessed record: ") + e.what());
  }
}

struct PreprocessOptions {
  SizeThresholds thresholds;
  double instance_pad = 0.1;
  ScaleFn scale_fn = default_scale_factor;
  std::size_t concurrency = 1;
};

/// Computes priors and crops for one record. Crops are written under
/// `out_dir/crops`; `image_dir` resolves the record's image path.
inline PreprocessedRecord preprocess_record(const ImageRecord& record, const fs::path& image_dir,
                                            const fs::path& out_dir, const PreprocessOptions& opt = {}) {
  const Image image = load_image(resolve_image(record, image_dir));
  if (image.width != record.width || image.height != record.height)
    throw Error(record.id + ": record size disagrees with image pixels");
  const fs::path crop_dir = out_dir / "crops";
  fs::create_directories(crop_dir);

  PreprocessedRecord p;
  p.record = record;
  p.record.image = relative_path(resolve_image(record, image_dir), out_dir);
  p.regions = extract_foreground_regions(record.instances, record.width, record.height, opt.scale_fn);
  for (std::size_t k = 0; k < p.regions.size(); ++k) {
    auto& region = p.regions[k];
    region.id = record.id + ".r" + std::to_string(k);
    const std::string name = region.id + ".fg.png";
    save_png(crop(image, covering_pixels(region.box, image.width, image.height)), crop_dir / name);
    p.region_crops.push_back("crops/" + name);
  }
  for (const auto& in : record.instances) {
    InstancePrep ip;
    ip.id = in.id;
    ip.size = classify_size(in.area_ratio, opt.thresholds);
    ip.position = classify_absolute_position(in.box, record.width, record.height);
    const std::string name = in.id + ".self.png";
    save_png(crop_instance_region(image, in.box, opt.instance_pad), crop_dir / name);
    ip.self_crop = "crops/" + name;
    for (const auto& region : p.regions) {
      if (std::find(region.member_instances.begin(), region.member_instances.end(), in.id) !=
          region.member_instances.end()) {
        const PixelRect rr = covering_pixels(region.box, image.width, image.height);
        ip.region = region.id;
        ip.box_in_region = translate(in.box, -rr.x, -rr.y);
      }
    }
    p.instances.push_back(std::move(ip));
  }
  return p;
}

/// Runs preprocess_record over every record under `input` (file or
/// directory) and writes `out_dir/preprocessed.jsonl`.
inline std::size_t preprocess_dataset(const fs::path& input, const fs::path& out_dir,
                                      const PreprocessOptions& opt = {}) {
  opt.thresholds.check();
  struct Item {
    ImageRecord record;
    fs::path dir;
  };
  std::vector<Item> items;
  for (const auto& file : jsonl_inputs(input))
    for (const auto& j : read_jsonl(file)) items.push_back({record_from_json(j), file.parent_path()});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return record_order(a.record, b.record); });
  fs::create_directories(out_dir);
  const auto rows = parallel_map<ordered_json>(items.size(), opt.concurrency, [&](std::size_t i) {
    return to_json(preprocess_record(items[i].record, items[i].dir, out_dir, opt));
  });
  write_jsonl(out_dir / "preprocessed.jsonl", rows);
  return rows.size();
}

}  // namespace w2s

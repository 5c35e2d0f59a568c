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
#include <array>
#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

#include "w2s/config.hpp"
#include "w2s/ingest.hpp"
#include "w2s/error.hpp"
#include "w2s/parallel.hpp"
#include "w2s/postprocess.hpp"
#include "w2s/records.hpp"
#include "w2s/rng.hpp"

namespace w2s {

// ---------------------------------------------------------------------------
// Base / novel category split

inline constexpr std::array<std::string_view, 75> kBaseClasses{
    "aircraft", "aircraft-hangar", "airplane", "baseball-diamond", "baseball-field", "bicycle", "bridge",
    "building", "car", "cargo-car", "cargo-plane", "cargo-truck", "cement-mixer", "chimney", "construction-site",
    "container", "container-crane", "container-ship", "crane-truck", "dam", "damaged-building", "dump-truck",
    "engineering-vehicle", "expressway-service-area", "expressway-toll-station", "facility", "ferry",
    "fishing-vessel", "fixed-wing-aircraft", "flat-car", "front-loader-or-bulldozer", "golf-field", "ground-grader",
    "harbor", "haul-truck", "helipad", "hut-or-tent", "large-vehicle", "locomotive", "oil-tanker", "overpass",
    "passenger-car", "passenger-vehicle", "people", "plane", "pylon", "railway-vehicle", "roundabout", "sailboat",
    "shed", "ship", "shipping-container", "small-aircraft", "small-car", "small-vehicle", "soccer-ball-field",
    "stadium", "storage-tank", "straddle-carrier", "tank-car", "tennis-court", "tower", "tower-crane", "trailer",
    "train-station", "truck", "truck-tractor", "truck-tractor-with-flatbed-trailer",
    "truck-tractor-with-liquid-tank", "tugboat", "utility-truck", "van", "vehicle", "vehicle-lot", "yacht"};

inline constexpr std::array<std::string_view, 25> kNovelClasses{
    "airport", "awning-tricycle", "barge", "basketball-court", "bus", "crossroad", "excavator",
    "ground-track-field", "helicopter", "maritime-vessel", "mobile-crane", "motor", "motorboat", "parking-lot",
    "pedestrian", "pickup-truck", "playground", "reach-stacker", "scraper-or-tractor", "shipping-container-lot",
    "swimming-pool", "t-junction", "tricycle", "truck-tractor-with-box-trailer", "windmill"};

struct SplitSpec {
  std::set<std::string> base;
  std::set<std::string> novel;

  void check() const {
    for (const auto& c : base)
      if (novel.count(c)) throw InvalidArgument("split spec: '" + c + "' is both base and novel");
  }

  bool is_novel(const std::string& category) const {
    if (novel.count(category)) return true;
    if (base.count(category)) return false;
    throw SchemaError("category '" + category + "' is not in the base/novel split");
  }
};

inline SplitSpec default_split_spec() {
  SplitSpec s;
  for (auto c : kBaseClasses) s.base.emplace(c);
  for (auto c : kNovelClasses) s.novel.emplace(c);
  return s;
}

/// [split] base = a, b, ... / novel = ...
inline SplitSpec load_split_spec(const fs::path& path) {
  const Config cfg = Config::load(path);
  SplitSpec s;
  for (const auto& c : split_list(cfg.get("base", "split"))) s.base.insert(slugify(c));
  for (const auto& c : split_list(cfg.get("novel", "split"))) s.novel.insert(slugify(c));
  s.check();
  return s;
}

// ---------------------------------------------------------------------------
// Samples

enum class Task { detection, grounding };

inline const char* to_string(Task t) { return t == Task::detection ? "detection" : "grounding"; }

inline constexpr std::array<std::string_view, 5> kSplitTags{"P", "FT", "ValZSD", "ValFT", "Test"};

struct PromptSpec {
  std::vector<std::string> c_pos;
  std::vector<std::string> c_neg;
  std::vector<std::string> sampled_negatives;
  std::vector<std::string> rendered;  // final shuffled text prompt list

  friend bool operator==(const PromptSpec&, const PromptSpec&) = default;
};

struct GroundingSample {
  std::string id;
  std::string image;
  int width = 0;
  int height = 0;
  Task task = Task::detection;
  std::string text;                     // grounding: the caption
  std::vector<std::string> categories;  // detection: class list; grounding: the caption's class
  std::vector<Box> boxes;
  std::vector<std::string> box_labels;  // detection only, parallel to boxes
  std::vector<std::string> instance_ids;
  std::string caption_id;
  std::string caption_kind;
  std::map<std::string, std::string> attributes;  // grounding: attributes the caption expresses
  std::string source;
  std::string image_id;
  std::set<std::string> splits;
  std::optional<PromptSpec> prompt;

  friend bool operator==(const GroundingSample&, const GroundingSample&) = default;
};

inline void validate(const GroundingSample& s) {
  if (s.id.empty()) throw SchemaError("sample without id");
  if (s.task == Task::grounding) {
    if (s.boxes.empty()) throw SchemaError(s.id + ": grounding sample without boxes");
    if (s.text.empty()) throw SchemaError(s.id + ": grounding sample without caption");
  } else if (s.box_labels.size() != s.boxes.size()) {
    throw SchemaError(s.id + ": detection labels do not line up with boxes");
  }
  for (const auto& b : s.boxes)
    if (!b.valid()) throw SchemaError(s.id + ": invalid box");
  for (const auto& t : s.splits)
    if (std::find(kSplitTags.begin(), kSplitTags.end(), t) == kSplitTags.end())
      throw SchemaError(s.id + ": unknown split tag '" + t + "'");
}

inline ordered_json to_json(const PromptSpec& p) {
  return {{"c_pos", p.c_pos}, {"c_neg", p.c_neg}, {"sampled_negatives", p.sampled_negatives}, {"rendered", p.rendered}};
}

inline ordered_json to_json(const GroundingSample& s) {
  ordered_json j;
  j["id"] = s.id;
  j["image"] = s.image;
  j["width"] = s.width;
  j["height"] = s.height;
  j["task"] = to_string(s.task);
  if (s.task == Task::grounding) j["text"] = s.text;
  j["categories"] = s.categories;
  j["boxes"] = ordered_json::array();
  for (const auto& b : s.boxes) j["boxes"].push_back({b.x1, b.y1, b.x2, b.y2});
  if (s.task == Task::detection) j["box_labels"] = s.box_labels;
  j["instance_ids"] = s.instance_ids;
  if (s.task == Task::grounding) {
    j["caption_id"] = s.caption_id;
    j["caption_kind"] = s.caption_kind;
    j["attributes"] = s.attributes;
  }
  j["source"] = s.source;
  j["image_id"] = s.image_id;
  j["splits"] = s.splits;
  if (s.prompt) j["prompt"] = to_json(*s.prompt);
  return j;
}

inline GroundingSample sample_from_json(const json& j) {
  try {
    GroundingSample s;
    s.id = j.at("id").get<std::string>();
    s.image = j.at("image").get<std::string>();
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    const std::string task = j.at("task").get<std::string>();
    if (task != "detection" && task != "grounding") throw SchemaError(s.id + ": unknown task '" + task + "'");
    s.task = task == "detection" ? Task::detection : Task::grounding;
    s.text = j.value("text", "");
    s.categories = j.at("categories").get<std::vector<std::string>>();
    for (const auto& b : j.at("boxes")) s.boxes.push_back(box_from_json(b));
    s.box_labels = j.value("box_labels", std::vector<std::string>{});
    s.instance_ids = j.value("instance_ids", std::vector<std::string>{});
    s.caption_id = j.value("caption_id", "");
    s.caption_kind = j.value("caption_kind", "");
    s.attributes = j.value("attributes", std::map<std::string, std::string>{});
    s.source = j.at("source").get<std::string>();
    s.image_id = j.at("image_id").get<std::string>();
    s.splits = j.at("splits").get<std::set<std::string>>();
    if (j.contains("prompt")) {
      const auto& p = j.at("prompt");
      s.prompt = PromptSpec{p.at("c_pos").get<std::vector<std::string>>(), p.at("c_neg").get<std::vector<std::string>>(),
                            p.at("sampled_negatives").get<std::vector<std::string>>(),
                            p.at("rendered").get<std::vector<std::string>>()};
    }
    validate(s);
    return s;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("sample: ") + e.what());
  }
}

inline bool sample_order(const GroundingSample& a, const GroundingSample& b) {
  return std::tie(a.source, a.image_id, a.caption_id) < std::tie(b.source, b.image_id, b.caption_id);
}

// ---------------------------------------------------------------------------
// Caption sampling

struct CaptionChoice {
  std::string caption_id;
  CaptionKind kind;
  std::string category;
};

/// Buckets captions by (kind, category) and draws one caption per bucket
/// visit until `quota` captions are kept or every bucket is empty.
/// Visit order interleaves kinds (k-th category of each kind in turn, kinds
/// and categories sorted) and starts at a seeded offset, so no kind or
/// category is favoured when the quota cuts a pass short.
inline std::vector<std::string> sample_captions(const std::vector<CaptionChoice>& captions, std::size_t quota, Rng& rng) {
  if (quota == 0) throw InvalidArgument("caption quota must be at least 1");
  std::map<CaptionKind, std::map<std::string, std::vector<std::string>>> by_kind;
  for (const auto& c : captions) by_kind[c.kind][c.category].push_back(c.caption_id);
  std::vector<std::vector<std::string>*> order;
  for (std::size_t rank = 0;; ++rank) {
    bool any = false;
    for (auto& [kind, cats] : by_kind) {
      if (rank >= cats.size()) continue;
      any = true;
      order.push_back(&std::next(cats.begin(), static_cast<std::ptrdiff_t>(rank))->second);
    }
    if (!any) break;
  }
  std::vector<std::string> kept;
  if (order.empty()) return kept;
  std::size_t pos = uniform_index(rng, order.size());
  std::size_t left = captions.size();
  while (kept.size() < quota && left > 0) {
    auto& bucket = *order[pos];
    if (!bucket.empty()) {
      const std::size_t k = uniform_index(rng, bucket.size());
      kept.push_back(bucket[k]);
      bucket.erase(bucket.begin() + static_cast<std::ptrdiff_t>(k));
      --left;
    }
    pos = (pos + 1) % order.size();
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Splits

struct SplitOptions {
  double val_fraction_zsd = 1.0;
  std::uint64_t seed = 0;
};

/// Split tags for each record: P (train, base-only), FT (train), ValZSD
/// (seeded share of val records with a novel instance), ValFT (val).
inline std::vector<std::set<std::string>> build_splits(const std::vector<ImageRecord>& records, const SplitSpec& spec,
                                                       const SplitOptions& opt = {}) {
  if (opt.val_fraction_zsd < 0 || opt.val_fraction_zsd > 1) throw InvalidArgument("val_fraction_zsd outside [0,1]");
  std::vector<std::set<std::string>> tags(records.size());
  std::vector<std::size_t> zsd_pool;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    bool novel = false;
    for (const auto& in : r.instances) novel = spec.is_novel(in.category) || novel;
    if (r.partition == "train") {
      tags[i].insert("FT");
      if (!novel) tags[i].insert("P");
    } else {
      tags[i].insert("ValFT");
      if (novel) zsd_pool.push_back(i);
    }
  }
  std::sort(zsd_pool.begin(), zsd_pool.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(records[a].source, records[a].id) < std::tie(records[b].source, records[b].id);
  });
  Rng rng = derive_rng(opt.seed, "val-zsd");
  shuffle(zsd_pool, rng);
  const auto take = static_cast<std::size_t>(std::llround(opt.val_fraction_zsd * static_cast<double>(zsd_pool.size())));
  for (std::size_t k = 0; k < take; ++k) tags[zsd_pool[k]].insert("ValZSD");
  return tags;
}

// ---------------------------------------------------------------------------
// Training prompts

/// All positives plus k ~ U{1..|C_neg|} negatives drawn from the sample's
/// own source classes, then shuffled. Grounding samples use the caption as
/// their only positive.
inline PromptSpec build_training_prompt(const GroundingSample& sample, const std::set<std::string>& source_classes,
                                        Rng& rng) {
  PromptSpec p;
  const std::set<std::string> pos(sample.categories.begin(), sample.categories.end());
  p.c_pos.assign(pos.begin(), pos.end());
  for (const auto& c : source_classes)
    if (!pos.count(c)) p.c_neg.push_back(c);
  if (!p.c_neg.empty()) {
    const std::size_t k = 1 + uniform_index(rng, p.c_neg.size());
    std::vector<std::string> pool = p.c_neg;
    shuffle(pool, rng);
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    p.sampled_negatives = std::move(pool);
  }
  if (sample.task == Task::grounding) {
    p.rendered.push_back(sample.text);
  } else {
    for (const auto& c : p.c_pos) p.rendered.push_back(category_words(c));
  }
  for (const auto& c : p.sampled_negatives) p.rendered.push_back(category_words(c));
  shuffle(p.rendered, rng);
  return p;
}

// ---------------------------------------------------------------------------
// Build + emit

struct BuildOptions {
  SplitSpec spec = default_split_spec();
  std::uint64_t seed = 0;
  std::size_t quota = 12;
  double val_fraction_zsd = 1.0;
  std::size_t concurrency = 1;
};

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("sha256 failed");
  std::ostringstream out;
  for (unsigned i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return out.str();
}

/// Detection sample plus sampled grounding samples for one image.
inline std::vector<GroundingSample> image_samples(const CaptionedRecord& r, const std::set<std::string>& tags,
                                                  const std::string& image_path, const BuildOptions& opt) {
  std::vector<GroundingSample> out;
  std::map<std::string, const Instance*> by_id;
  for (const auto& in : r.record.instances) by_id[in.id] = &in;
  if (!r.record.instances.empty()) {
    GroundingSample d;
    d.id = r.record.id + ".det";
    d.task = Task::detection;
    std::set<std::string> cats;
    for (const auto& in : r.record.instances) {
      d.boxes.push_back(in.box);
      d.box_labels.push_back(in.category);
      d.instance_ids.push_back(in.id);
      cats.insert(in.category);
    }
    d.categories.assign(cats.begin(), cats.end());
    out.push_back(std::move(d));
  }
  std::map<std::string, const Caption*> captions;
  for (const auto& c : r.captions) captions[c.id] = &c;
  std::vector<CaptionChoice> choices;
  std::map<std::string, const CaptionInstancePair*> pairs;
  for (const auto& p : r.pairs) {
    const Caption& c = *captions.at(p.caption_id);
    if (c.kind == CaptionKind::vocab) continue;
    choices.push_back({c.id, c.kind, c.attributes.at(Attr::category)});
    pairs[c.id] = &p;
  }
  Rng rng = derive_rng(opt.seed, "captions:" + r.record.source + "/" + r.record.id);
  for (const auto& id : sample_captions(choices, opt.quota, rng)) {
    const Caption& c = *captions.at(id);
    GroundingSample g;
    g.id = id;
    g.task = Task::grounding;
    g.text = c.text;
    g.categories = {c.attributes.at(Attr::category)};
    for (const auto& iid : pairs.at(id)->instance_ids) {
      g.boxes.push_back(by_id.at(iid)->box);
      g.instance_ids.push_back(iid);
    }
    g.caption_id = id;
    g.caption_kind = std::string(to_string(c.kind));
    for (const auto& [a, v] : c.attributes) g.attributes[std::string(to_string(a))] = v;
    out.push_back(std::move(g));
  }
  for (auto& s : out) {
    s.image = image_path;
    s.width = r.record.width;
    s.height = r.record.height;
    s.source = r.record.source;
    s.image_id = r.record.id;
    s.splits = tags;
  }
  return out;
}

struct BuildSummary {
  std::size_t images = 0;
  std::size_t samples = 0;
  std::map<std::string, std::map<std::string, std::size_t>> per_split;  // tag -> {images, detection, grounding}
  std::string sha256;
};

/// Samples ordered by (source, image id, caption id) with training prompts
/// attached to P/FT samples.
inline std::vector<GroundingSample> build_samples(const std::vector<std::pair<CaptionedRecord, fs::path>>& input,
                                                  const fs::path& out_dir, const BuildOptions& opt) {
  opt.spec.check();
  std::vector<ImageRecord> records;
  for (const auto& [r, dir] : input) records.push_back(r.record);
  const auto tags = build_splits(records, opt.spec, {opt.val_fraction_zsd, opt.seed});

  std::map<std::string, std::set<std::string>> source_classes;  // observed in the corpus
  for (const auto& r : records)
    for (const auto& in : r.instances) source_classes[r.source].insert(in.category);

  auto groups = parallel_map<std::vector<GroundingSample>>(input.size(), opt.concurrency, [&](std::size_t i) {
    const auto& [r, dir] = input[i];
    auto samples = image_samples(r, tags[i], relative_path(resolve_image(r.record, dir), out_dir), opt);
    if (tags[i].count("FT")) {
      // P samples must not name novel classes, not even as negatives.
      std::set<std::string> classes = source_classes.at(r.record.source);
      if (tags[i].count("P")) std::erase_if(classes, [&](const std::string& c) { return opt.spec.is_novel(c); });
      for (auto& s : samples) {
        Rng rng = derive_rng(opt.seed, "prompt:" + s.source + "/" + s.id);
        s.prompt = build_training_prompt(s, classes, rng);
      }
    }
    return samples;
  });
  std::vector<GroundingSample> out;
  for (auto& g : groups)
    for (auto& s : g) out.push_back(std::move(s));
  std::sort(out.begin(), out.end(), sample_order);
  return out;
}

inline BuildSummary emit_dataset(const std::vector<GroundingSample>& samples, const fs::path& out_dir,
                                 const ordered_json& build_info = ordered_json::object()) {
  for (const auto& s : samples) validate(s);
  std::string text;
  for (const auto& s : samples) text += to_json(s).dump() + "\n";
  fs::create_directories(out_dir);
  write_file_bytes(out_dir / "dataset.jsonl", std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));

  BuildSummary sum;
  sum.samples = samples.size();
  sum.sha256 = sha256_hex(text);
  std::set<std::string> images;
  std::map<std::string, std::set<std::string>> split_images;
  for (const auto& t : kSplitTags) sum.per_split[std::string(t)] = {{"images", 0}, {"detection", 0}, {"grounding", 0}};
  for (const auto& s : samples) {
    images.insert(s.source + "/" + s.image_id);
    for (const auto& t : s.splits) {
      split_images[t].insert(s.source + "/" + s.image_id);
      ++sum.per_split[t][to_string(s.task)];
    }
  }
  sum.images = images.size();
  for (const auto& [t, ims] : split_images) sum.per_split[t]["images"] = ims.size();

  ordered_json manifest;
  manifest["format"] = "w2s-grounding-jsonl/1";
  manifest["file"] = "dataset.jsonl";
  manifest["sha256"] = sum.sha256;
  manifest["samples"] = sum.samples;
  manifest["images"] = sum.images;
  manifest["splits"] = ordered_json::object();
  for (const auto& t : kSplitTags) {
    const auto& c = sum.per_split[std::string(t)];
    manifest["splits"][std::string(t)] = {{"images", c.at("images")}, {"detection", c.at("detection")},
                                          {"grounding", c.at("grounding")}};
  }
  manifest["build"] = build_info;
  const std::string m = manifest.dump(2) + "\n";
  write_file_bytes(out_dir / "manifest.json", std::span(reinterpret_cast<const std::uint8_t*>(m.data()), m.size()));
  return sum;
}

inline BuildSummary build_dataset(const fs::path& input, const fs::path& out_dir, const BuildOptions& opt = {}) {
  auto captioned = read_captioned(input);
  std::sort(captioned.begin(), captioned.end(),
            [](const auto& a, const auto& b) { return record_order(a.first.record, b.first.record); });
  const auto samples = build_samples(captioned, out_dir, opt);
  ordered_json info{{"seed", opt.seed}, {"quota", opt.quota}, {"val_fraction_zsd", opt.val_fraction_zsd}};
  return emit_dataset(samples, out_dir, info);
}

inline std::vector<GroundingSample> read_samples(const fs::path& input) {
  std::vector<GroundingSample> out;
  for (const auto& file : jsonl_inputs(input, "dataset.jsonl"))
    for (const auto& j : read_jsonl(file)) out.push_back(sample_from_json(j));
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

struct DatasetStatistics {
  std::size_t samples = 0;
  std::size_t grounding = 0;
  std::size_t detection = 0;
  double mean_caption_words = 0;
  double single_instance_fraction = 0;
  std::map<std::string, std::size_t> kind_histogram;
  std::map<std::size_t, std::size_t> instances_per_caption;
  std::map<std::string, std::size_t> distinct_attribute_values;
  std::map<std::string, std::size_t> split_samples;
};

inline DatasetStatistics compute_statistics(const std::vector<GroundingSample>& samples) {
  DatasetStatistics st;
  std::size_t words = 0, single = 0;
  std::map<std::string, std::set<std::string>> values;
  for (const auto& s : samples) {
    ++st.samples;
    for (const auto& t : s.splits) ++st.split_samples[t];
    if (s.task == Task::detection) {
      ++st.detection;
      continue;
    }
    ++st.grounding;
    words += word_count(s.text);
    ++st.kind_histogram[s.caption_kind];
    ++st.instances_per_caption[s.boxes.size()];
    if (s.boxes.size() == 1) ++single;
    for (const auto& [a, v] : s.attributes) values[a].insert(normalize_text(v));
  }
  if (st.grounding) {
    st.mean_caption_words = static_cast<double>(words) / static_cast<double>(st.grounding);
    st.single_instance_fraction = static_cast<double>(single) / static_cast<double>(st.grounding);
  }
  for (const auto& [a, vs] : values) st.distinct_attribute_values[a] = vs.size();
  return st;
}

// Published full-corpus figures, reported next to local numbers for reference.
inline constexpr double kReferenceMeanCaptionWords = 10.61;
inline constexpr double kReferenceSingleInstanceFraction = 0.662;

inline ordered_json to_json(const DatasetStatistics& st) {
  ordered_json j;
  j["samples"] = st.samples;
  j["detection_samples"] = st.detection;
  j["grounding_samples"] = st.grounding;
  j["mean_caption_words"] = st.mean_caption_words;
  j["single_instance_fraction"] = st.single_instance_fraction;
  j["caption_kinds"] = st.kind_histogram;
  j["instances_per_caption"] = ordered_json::object();
  for (const auto& [n, c] : st.instances_per_caption) j["instances_per_caption"][std::to_string(n)] = c;
  j["distinct_attribute_values"] = st.distinct_attribute_values;
  j["split_samples"] = st.split_samples;
  j["reference_full_corpus"] = {{"mean_caption_words", kReferenceMeanCaptionWords},
                                {"single_instance_fraction", kReferenceSingleInstanceFraction}};
  return j;
}

inline std::string format_statistics(const DatasetStatistics& st) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(2);
  o << "samples            " << st.samples << " (" << st.detection << " detection, " << st.grounding << " grounding)\n";
  o << "mean caption words " << st.mean_caption_words << "  (full corpus reference " << kReferenceMeanCaptionWords
    << ")\n";
  o << "single-instance    " << 100.0 * st.single_instance_fraction << "%  (full corpus reference "
    << 100.0 * kReferenceSingleInstanceFraction << "%)\n";
  o << "caption kinds\n";
  for (const auto& [k, n] : st.kind_histogram) o << "  " << std::left << std::setw(18) << k << n << "\n";
  o << "instances per caption\n";
  for (const auto& [k, n] : st.instances_per_caption) o << "  " << std::left << std::setw(18) << k << n << "\n";
  o << "distinct attribute values\n";
  for (const auto& [k, n] : st.distinct_attribute_values) o << "  " << std::left << std::setw(18) << k << n << "\n";
  o << "samples per split\n";
  for (const auto& [k, n] : st.split_samples) o << "  " << std::left << std::setw(18) << k << n << "\n";
  return o.str();
}

}  // namespace w2s

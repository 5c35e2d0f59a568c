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

#include <array>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "w2s/annotator.hpp"
#include "w2s/error.hpp"
#include "w2s/http.hpp"
#include "w2s/parallel.hpp"
#include "w2s/records.hpp"
#include "w2s/rng.hpp"

namespace w2s {

enum class CaptionKind { vocab, phrase_size, phrase_color, phrase_size_color, sent_self, sent_relative, sent_absolute };

inline constexpr std::array<std::string_view, 7> kCaptionKindNames{
    "vocab", "phrase_size", "phrase_color", "phrase_size_color", "sent_self", "sent_relative", "sent_absolute"};

inline std::string_view to_string(CaptionKind k) { return kCaptionKindNames[static_cast<int>(k)]; }

inline CaptionKind parse_caption_kind(std::string_view s) {
  for (std::size_t i = 0; i < kCaptionKindNames.size(); ++i)
    if (kCaptionKindNames[i] == s) return static_cast<CaptionKind>(i);
  throw SchemaError("unknown caption kind '" + std::string(s) + "'");
}

inline bool is_phrase(CaptionKind k) { return k >= CaptionKind::phrase_size && k <= CaptionKind::phrase_size_color; }
inline bool is_sentence(CaptionKind k) { return k >= CaptionKind::sent_self; }

enum class Attr { category, size, color, geometry, relative_position, absolute_position };

inline constexpr std::array<std::string_view, 6> kAttrNames{"category", "size", "color", "geometry",
                                                            "relative_position", "absolute_position"};

inline std::string_view to_string(Attr a) { return kAttrNames[static_cast<int>(a)]; }

inline Attr parse_attr(std::string_view s) {
  for (std::size_t i = 0; i < kAttrNames.size(); ++i)
    if (kAttrNames[i] == s) return static_cast<Attr>(i);
  throw SchemaError("unknown attribute '" + std::string(s) + "'");
}

inline std::optional<std::string> attribute_of(const AttributeSet& a, Attr which) {
  switch (which) {
    case Attr::category: return a.category;
    case Attr::size: return a.size;
    case Attr::color: return a.color;
    case Attr::geometry: return a.geometry;
    case Attr::relative_position:
      return a.relative_position.empty() ? std::nullopt : std::optional(a.relative_position);
    case Attr::absolute_position:
      return a.absolute_position.empty() ? std::nullopt : std::optional(a.absolute_position);
  }
  return std::nullopt;
}

struct Caption {
  std::string id;
  std::string text;
  CaptionKind kind = CaptionKind::vocab;
  std::string source_instance;
  std::map<Attr, std::string> attributes;  // what the caption expresses

  friend bool operator==(const Caption&, const Caption&) = default;
};

struct CaptionInstancePair {
  std::string caption_id;
  std::vector<std::string> instance_ids;
  std::string image_id;

  friend bool operator==(const CaptionInstancePair&, const CaptionInstancePair&) = default;
};

/// Slug shown as words: "ground-track-field" -> "ground track field".
inline std::string category_words(std::string slug) {
  for (char& c : slug)
    if (c == '-' || c == '_') c = ' ';
  return slug;
}

inline std::string caption_id(const std::string& instance_id, CaptionKind k) {
  return instance_id + "." + std::string(to_string(k));
}

/// vocab plus the size/color phrase combinations; color phrases are left
/// out when the color is unknown.
inline std::vector<Caption> generate_phrase_captions(const std::string& instance_id, const AttributeSet& a) {
  if (a.category.empty() || a.size.empty()) throw InvalidArgument(instance_id + ": phrase captions need category and size");
  const std::string cat = category_words(a.category);
  std::vector<Caption> out;
  out.push_back({caption_id(instance_id, CaptionKind::vocab), cat, CaptionKind::vocab, instance_id,
                 {{Attr::category, a.category}}});
  out.push_back({caption_id(instance_id, CaptionKind::phrase_size), a.size + " " + cat, CaptionKind::phrase_size,
                 instance_id, {{Attr::category, a.category}, {Attr::size, a.size}}});
  if (a.color) {
    out.push_back({caption_id(instance_id, CaptionKind::phrase_color), *a.color + " " + cat, CaptionKind::phrase_color,
                   instance_id, {{Attr::category, a.category}, {Attr::color, *a.color}}});
    out.push_back({caption_id(instance_id, CaptionKind::phrase_size_color), a.size + " " + *a.color + " " + cat,
                   CaptionKind::phrase_size_color, instance_id,
                   {{Attr::category, a.category}, {Attr::size, a.size}, {Attr::color, *a.color}}});
  }
  return out;
}

/// The three model-written sentences. Self expresses category, size and any
/// known color/geometry; relative adds the relative position; absolute adds
/// the grid label.
inline std::vector<Caption> sentence_captions(const std::string& instance_id, const SentenceCaptions& s) {
  const AttributeSet& a = s.attributes;
  std::map<Attr, std::string> attrs{{Attr::category, a.category}, {Attr::size, a.size}};
  if (a.color) attrs[Attr::color] = *a.color;
  if (a.geometry) attrs[Attr::geometry] = *a.geometry;
  std::vector<Caption> out;
  out.push_back({caption_id(instance_id, CaptionKind::sent_self), s.self_caption, CaptionKind::sent_self, instance_id, attrs});
  if (!a.relative_position.empty()) attrs[Attr::relative_position] = a.relative_position;
  out.push_back({caption_id(instance_id, CaptionKind::sent_relative), s.relative_caption, CaptionKind::sent_relative,
                 instance_id, attrs});
  attrs[Attr::absolute_position] = a.absolute_position;
  out.push_back({caption_id(instance_id, CaptionKind::sent_absolute), s.absolute_caption, CaptionKind::sent_absolute,
                 instance_id, attrs});
  return out;
}

inline std::vector<Caption> instance_captions(const std::string& instance_id, const SentenceCaptions& s) {
  auto out = generate_phrase_captions(instance_id, s.attributes);
  auto sent = sentence_captions(instance_id, s);
  out.insert(out.end(), sent.begin(), sent.end());
  return out;
}

// ---------------------------------------------------------------------------
// Similarity

/// Lowercase, trim, collapse runs of whitespace.
inline std::string normalize_text(std::string_view s) {
  std::string out;
  bool space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

class SimilarityBackend {
 public:
  virtual ~SimilarityBackend() = default;
  /// Score in [0, 1]; symmetric.
  virtual double similarity(std::string_view a, std::string_view b) const = 0;
  /// Optional warm-up so later similarity() calls need no I/O.
  virtual void prefetch(const std::vector<std::string>&) const {}
};

class ExactSimilarity : public SimilarityBackend {
 public:
  double similarity(std::string_view a, std::string_view b) const override {
    const std::string na = normalize_text(a), nb = normalize_text(b);
    if (na.empty() || nb.empty()) throw InvalidArgument("similarity of empty text");
    return na == nb ? 1.0 : 0.0;
  }
};

/// Text -> vector service.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) const = 0;
};

/// POST {"texts": [...]} -> {"vectors": [[...], ...]}.
class HttpEmbedder : public Embedder {
 public:
  explicit HttpEmbedder(std::string url, std::chrono::milliseconds timeout = std::chrono::milliseconds(30000))
      : url_(std::move(url)), timeout_(timeout) {
    parse_endpoint(url_);
  }

  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) const override {
    const json reply = post_json(url_, json{{"texts", texts}}, timeout_);
    try {
      auto vectors = reply.at("vectors").get<std::vector<std::vector<double>>>();
      if (vectors.size() != texts.size()) throw TransportError(TransportError::Kind::bad_body, url_ + ": vector count mismatch");
      return vectors;
    } catch (const json::exception&) {
      throw TransportError(TransportError::Kind::bad_body, url_ + ": no vectors in reply");
    }
  }

 private:
  std::string url_;
  std::chrono::milliseconds timeout_;
};

/// Offline embedder: hashed character trigrams of the padded normalized text.
class TrigramEmbedder : public Embedder {
 public:
  explicit TrigramEmbedder(std::size_t dims = 256) : dims_(dims) {}

  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) const override {
    std::vector<std::vector<double>> out;
    for (const auto& t : texts) {
      const std::string s = "  " + normalize_text(t) + "  ";
      std::vector<double> v(dims_, 0.0);
      for (std::size_t i = 0; i + 3 <= s.size(); ++i) v[fnv1a(std::string_view(s).substr(i, 3)) % dims_] += 1.0;
      out.push_back(std::move(v));
    }
    return out;
  }

 private:
  std::size_t dims_;
};

/// (1 + cos) / 2 over L2-normalized vectors. Requests are batched and
/// memoized by normalized text.
class EmbeddingSimilarity : public SimilarityBackend {
 public:
  explicit EmbeddingSimilarity(std::shared_ptr<const Embedder> embedder, std::size_t batch = 64)
      : embedder_(std::move(embedder)), batch_(std::max<std::size_t>(1, batch)) {}

  void prefetch(const std::vector<std::string>& texts) const override {
    std::vector<std::string> missing;
    {
      std::lock_guard lock(mu_);
      std::set<std::string> seen;
      for (const auto& t : texts) {
        std::string n = normalize_text(t);
        if (n.empty()) throw InvalidArgument("similarity of empty text");
        if (!memo_.count(n) && seen.insert(n).second) missing.push_back(std::move(n));
      }
    }
    for (std::size_t i = 0; i < missing.size(); i += batch_) {
      std::vector<std::string> chunk(missing.begin() + i, missing.begin() + std::min(missing.size(), i + batch_));
      auto vectors = embedder_->embed(chunk);
      if (vectors.size() != chunk.size()) throw TransportError(TransportError::Kind::bad_body, "embedding count mismatch");
      std::lock_guard lock(mu_);
      for (std::size_t k = 0; k < chunk.size(); ++k) memo_.emplace(chunk[k], unit(std::move(vectors[k])));
    }
  }

  double similarity(std::string_view a, std::string_view b) const override {
    const std::string na = normalize_text(a), nb = normalize_text(b);
    if (na.empty() || nb.empty()) throw InvalidArgument("similarity of empty text");
    if (na == nb) return 1.0;
    prefetch({na, nb});
    std::lock_guard lock(mu_);
    const auto& va = memo_.at(na);
    const auto& vb = memo_.at(nb);
    if (va.size() != vb.size()) throw TransportError(TransportError::Kind::bad_body, "embedding dimensions differ");
    double dot = 0;
    for (std::size_t i = 0; i < va.size(); ++i) dot += va[i] * vb[i];
    return std::clamp((1.0 + dot) / 2.0, 0.0, 1.0);
  }

  std::size_t cached() const {
    std::lock_guard lock(mu_);
    return memo_.size();
  }

 private:
  static std::vector<double> unit(std::vector<double> v) {
    double n = 0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n > 0)
      for (double& x : v) x /= n;
    return v;
  }

  std::shared_ptr<const Embedder> embedder_;
  std::size_t batch_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, std::vector<double>> memo_;
};

// ---------------------------------------------------------------------------
// Matching

struct MatchCandidate {
  std::string id;
  AttributeSet attributes;
};

struct MatchOptions {
  double threshold = 0.90;
};

inline bool caption_matches(const Caption& c, const AttributeSet& inst, const SimilarityBackend& sim,
                            const MatchOptions& opt = {}) {
  for (const auto& [attr, value] : c.attributes) {
    const auto other = attribute_of(inst, attr);
    if (!other) return false;
    if (attr == Attr::category) {
      if (*other != value) return false;
    } else if (sim.similarity(value, *other) < opt.threshold) {
      return false;
    }
  }
  return true;
}

struct MatchResult {
  std::vector<CaptionInstancePair> pairs;
  std::vector<std::string> warnings;
};

/// Every caption against every candidate of the same image. Captions with
/// no match are dropped with a warning; identical (text, instance set)
/// pairs keep the first caption.
inline MatchResult match_caption_instances(const std::string& image_id, const std::vector<Caption>& captions,
                                           const std::vector<MatchCandidate>& instances, const SimilarityBackend& sim,
                                           const MatchOptions& opt = {}) {
  MatchResult out;
  std::set<std::pair<std::string, std::vector<std::string>>> seen;
  for (const auto& c : captions) {
    std::vector<std::string> ids;
    for (const auto& inst : instances)
      if (caption_matches(c, inst.attributes, sim, opt)) ids.push_back(inst.id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.empty()) {
      out.warnings.push_back(c.id + ": matches no instance");
      continue;
    }
    if (!seen.emplace(c.text, ids).second) continue;
    out.pairs.push_back({c.id, std::move(ids), image_id});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization and driver

inline ordered_json to_json(const Caption& c) {
  ordered_json attrs = ordered_json::object();
  for (const auto& [a, v] : c.attributes) attrs[std::string(to_string(a))] = v;
  return {{"id", c.id},
          {"text", c.text},
          {"kind", to_string(c.kind)},
          {"source_instance", c.source_instance},
          {"attributes", attrs}};
}

inline Caption caption_from_json(const json& j) {
  Caption c;
  c.id = j.at("id").get<std::string>();
  c.text = j.at("text").get<std::string>();
  c.kind = parse_caption_kind(j.at("kind").get<std::string>());
  c.source_instance = j.at("source_instance").get<std::string>();
  for (const auto& [k, v] : j.at("attributes").items()) c.attributes[parse_attr(k)] = v.get<std::string>();
  if (c.text.empty()) throw SchemaError(c.id + ": empty caption text");
  return c;
}

/// One row of captioned.jsonl: the image record, its captions and pairs.
struct CaptionedRecord {
  ImageRecord record;
  std::map<std::string, AttributeSet> attributes;  // annotated instances only
  std::vector<Caption> captions;
  std::vector<CaptionInstancePair> pairs;
};

inline ordered_json to_json(const CaptionedRecord& r) {
  ordered_json j;
  j["record"] = to_json(r.record);
  j["attributes"] = ordered_json::object();
  for (const auto& [id, a] : r.attributes) j["attributes"][id] = to_json(a);
  j["captions"] = ordered_json::array();
  for (const auto& c : r.captions) j["captions"].push_back(to_json(c));
  j["pairs"] = ordered_json::array();
  for (const auto& p : r.pairs) j["pairs"].push_back({{"caption_id", p.caption_id}, {"instance_ids", p.instance_ids}});
  return j;
}

inline CaptionedRecord captioned_from_json(const json& j) {
  try {
    CaptionedRecord r;
    r.record = record_from_json(j.at("record"));
    for (const auto& [id, a] : j.at("attributes").items()) r.attributes[id] = attributes_from_json(a);
    for (const auto& c : j.at("captions")) r.captions.push_back(caption_from_json(c));
    for (const auto& p : j.at("pairs"))
      r.pairs.push_back({p.at("caption_id").get<std::string>(), p.at("instance_ids").get<std::vector<std::string>>(),
                         r.record.id});
    return r;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("captioned record: ") + e.what());
  }
}

inline std::vector<std::pair<CaptionedRecord, fs::path>> read_captioned(const fs::path& input) {
  std::vector<std::pair<CaptionedRecord, fs::path>> out;
  for (const auto& file : jsonl_inputs(input, "captioned.jsonl"))
    for (const auto& j : read_jsonl(file)) out.emplace_back(captioned_from_json(j), file.parent_path());
  return out;
}

struct PostprocessOptions {
  MatchOptions match;
  std::size_t concurrency = 1;
};

struct PostprocessSummary {
  std::size_t records = 0;
  std::size_t captions = 0;
  std::size_t pairs = 0;
  std::size_t unmatched = 0;
  std::vector<std::string> warnings;
};

inline CaptionedRecord postprocess_record(const AnnotatedRecord& a, const SimilarityBackend& sim,
                                          const MatchOptions& opt, std::vector<std::string>* warnings = nullptr) {
  CaptionedRecord r;
  r.record = a.prep.record;
  std::vector<MatchCandidate> candidates;
  for (std::size_t k = 0; k < a.annotations.size(); ++k) {
    if (!a.annotations[k]) continue;
    const std::string& id = a.prep.instances[k].id;
    r.attributes[id] = a.annotations[k]->attributes;
    candidates.push_back({id, a.annotations[k]->attributes});
    auto caps = instance_captions(id, *a.annotations[k]);
    r.captions.insert(r.captions.end(), caps.begin(), caps.end());
  }
  std::vector<std::string> texts;
  for (const auto& c : r.captions)
    for (const auto& [attr, v] : c.attributes) texts.push_back(v);
  for (const auto& m : candidates)
    for (Attr attr : {Attr::size, Attr::color, Attr::geometry, Attr::relative_position, Attr::absolute_position})
      if (auto v = attribute_of(m.attributes, attr)) texts.push_back(*v);
  sim.prefetch(texts);
  MatchResult m = match_caption_instances(r.record.id, r.captions, candidates, sim, opt);
  r.pairs = std::move(m.pairs);
  if (warnings) *warnings = std::move(m.warnings);
  return r;
}

/// Reads annotated.jsonl and writes captioned.jsonl (one row per image) and
/// pairs.jsonl (one row per caption-instance pair).
inline PostprocessSummary postprocess_dataset(const fs::path& input, const SimilarityBackend& sim, const fs::path& out_dir,
                                              const PostprocessOptions& opt = {}) {
  struct Row {
    AnnotatedRecord rec;
    fs::path dir;
  };
  std::vector<Row> rows;
  for (const auto& file : jsonl_inputs(input, "annotated.jsonl"))
    for (const auto& j : read_jsonl(file)) rows.push_back({annotated_from_json(j), file.parent_path()});
  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return record_order(a.rec.prep.record, b.rec.prep.record); });

  struct Out {
    CaptionedRecord rec;
    std::vector<std::string> warnings;
  };
  auto outs = parallel_map<Out>(rows.size(), opt.concurrency, [&](std::size_t i) {
    Out o;
    o.rec = postprocess_record(rows[i].rec, sim, opt.match, &o.warnings);
    o.rec.record.image = relative_path(resolve_image(rows[i].rec.prep.record, rows[i].dir), out_dir);
    return o;
  });

  fs::create_directories(out_dir);
  PostprocessSummary sum;
  std::vector<ordered_json> captioned, pairs;
  for (auto& o : outs) {
    ++sum.records;
    sum.captions += o.rec.captions.size();
    sum.unmatched += o.warnings.size();
    for (auto& w : o.warnings) sum.warnings.push_back(std::move(w));
    std::map<std::string, const Caption*> by_id;
    for (const auto& c : o.rec.captions) by_id[c.id] = &c;
    for (const auto& p : o.rec.pairs) {
      const Caption& c = *by_id.at(p.caption_id);
      pairs.push_back({{"image_id", p.image_id},
                       {"caption_id", p.caption_id},
                       {"kind", to_string(c.kind)},
                       {"text", c.text},
                       {"instance_ids", p.instance_ids}});
    }
    sum.pairs += o.rec.pairs.size();
    captioned.push_back(to_json(o.rec));
  }
  write_jsonl(out_dir / "captioned.jsonl", captioned);
  write_jsonl(out_dir / "pairs.jsonl", pairs);
  return sum;
}

}  // namespace w2s

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
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "w2s/error.hpp"
#include "w2s/image.hpp"
#include "w2s/ingest.hpp"
#include "w2s/parallel.hpp"
#include "w2s/preprocess.hpp"
#include "w2s/prompts.hpp"
#include "w2s/records.hpp"
#include "w2s/response_parser.hpp"
#include "w2s/vlm_client.hpp"

namespace w2s {

/// Six attributes of one instance. The first three are rule-computed
/// priors; the rest come from the model.
struct AttributeSet {
  std::string category;
  std::string size;
  std::string absolute_position;
  std::optional<std::string> color;  // nullopt = unknown
  std::optional<std::string> geometry;
  std::string relative_position;

  friend bool operator==(const AttributeSet&, const AttributeSet&) = default;
};

struct SentenceCaptions {
  std::string self_caption;
  std::string relative_caption;
  std::string absolute_caption;
  AttributeSet attributes;
  std::vector<std::string> over_limit;  // rounds whose caption exceeded the word limit

  friend bool operator==(const SentenceCaptions&, const SentenceCaptions&) = default;
};

inline ordered_json to_json(const AttributeSet& a) {
  auto opt = [](const std::optional<std::string>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
  return {{"category", a.category},
          {"size", a.size},
          {"absolute_position", a.absolute_position},
          {"color", opt(a.color)},
          {"geometry", opt(a.geometry)},
          {"relative_position", a.relative_position}};
}

inline AttributeSet attributes_from_json(const json& j) {
  auto opt = [&](const char* k) -> std::optional<std::string> {
    if (!j.contains(k) || j.at(k).is_null()) return std::nullopt;
    return j.at(k).get<std::string>();
  };
  AttributeSet a;
  a.category = j.at("category").get<std::string>();
  a.size = j.at("size").get<std::string>();
  a.absolute_position = j.at("absolute_position").get<std::string>();
  a.color = opt("color");
  a.geometry = opt("geometry");
  a.relative_position = j.value("relative_position", "");
  return a;
}

inline ordered_json to_json(const SentenceCaptions& s) {
  return {{"self_caption", s.self_caption},
          {"relative_caption", s.relative_caption},
          {"absolute_caption", s.absolute_caption},
          {"attributes", to_json(s.attributes)},
          {"over_limit", s.over_limit}};
}

inline SentenceCaptions captions_from_json(const json& j) {
  SentenceCaptions s;
  s.self_caption = j.at("self_caption").get<std::string>();
  s.relative_caption = j.at("relative_caption").get<std::string>();
  s.absolute_caption = j.at("absolute_caption").get<std::string>();
  s.attributes = attributes_from_json(j.at("attributes"));
  s.over_limit = j.value("over_limit", std::vector<std::string>{});
  return s;
}

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };

  std::chrono::milliseconds backoff_before(int attempt) const {  // attempt >= 2
    return std::chrono::milliseconds(
        static_cast<long long>(static_cast<double>(initial_backoff.count()) * std::pow(multiplier, attempt - 2)));
  }
};

struct InstanceCrops {
  Bytes instance_png;
  Bytes foreground_png;  // highlighted
};

struct AnnotationFailure {
  std::string instance_id;
  Round round = Round::intro;
  std::string error_kind;
  std::string message;
  std::string raw_response;
  ordered_json partial = ordered_json::object();
};

inline ordered_json to_json(const AnnotationFailure& f) {
  return {{"instance_id", f.instance_id},
          {"round", to_string(f.round)},
          {"error_kind", f.error_kind},
          {"message", f.message},
          {"raw_response", f.raw_response},
          {"partial", f.partial}};
}

struct AnnotationResult {
  std::string instance_id;
  std::optional<SentenceCaptions> captions;
  std::optional<AnnotationFailure> failure;

  bool ok() const { return captions.has_value(); }
};

namespace detail {

struct RoundFailure {
  std::string kind;
  std::string message;
  std::string raw;
};

inline ordered_json partial_outputs(const ConversationState& s) {
  ordered_json p = ordered_json::object();
  if (!s.self_caption.empty()) {
    p["self_caption"] = s.self_caption;
    p["color"] = s.color ? ordered_json(*s.color) : ordered_json(nullptr);
    p["geometry"] = s.geometry ? ordered_json(*s.geometry) : ordered_json(nullptr);
  }
  if (!s.relative_caption.empty()) {
    p["relative_caption"] = s.relative_caption;
    p["relative_location"] = s.relative_location;
  }
  return p;
}

}  // namespace detail

/// Runs intro, r1, r2, r3 for one instance. Each round gets up to
/// `retry.attempts` tries; the last try rebuilds the conversation from a
/// fresh intro exchange. Never throws for backend or parse failures; those
/// come back as a failure record.
inline AnnotationResult annotate_instance(const std::string& instance_id, const Priors& priors,
                                          const InstanceCrops& crops, const VlmClient& client,
                                          const RetryPolicy& retry = {}) {
  ConversationState s;
  s.instance_id = instance_id;
  s.priors = priors;
  s.instance_crop = crops.instance_png;
  s.foreground_crop = crops.foreground_png;

  AnnotationResult result;
  result.instance_id = instance_id;
  std::vector<std::string> over_limit;
  const int attempts = std::max(1, retry.attempts);

  for (Round round : {Round::intro, Round::r1, Round::r2, Round::r3}) {
    s.round = round;
    const RoundSchema& schema = schema_for(round);
    std::optional<detail::RoundFailure> last;
    bool accepted = false;
    for (int attempt = 1; attempt <= attempts && !accepted; ++attempt) {
      if (attempt > 1 && retry.sleep) retry.sleep(retry.backoff_before(attempt));
      std::string raw;
      try {
        if (attempt == attempts && attempts > 1 && round != Round::intro) {
          // Replay: new intro exchange, then the accepted history.
          ConversationState fresh = s;
          fresh.round = Round::intro;
          fresh.messages.clear();
          const std::vector<Message> intro = build_prompt(Round::intro, fresh);
          std::string intro_reply = client.chat(intro);
          std::vector<Message> rebuilt = intro;
          rebuilt.push_back({Role::assistant, std::move(intro_reply), std::nullopt});
          rebuilt.insert(rebuilt.end(), s.messages.begin() + std::min<std::ptrdiff_t>(2, s.messages.size()),
                         s.messages.end());
          s.messages = std::move(rebuilt);
        }
        const std::vector<Message> prompt = build_prompt(round, s);
        raw = client.chat(prompt);
        if (round != Round::intro) {
          ParseResult parsed = parse_vlm_response(raw, schema);
          if (!parsed.ok()) {
            last = detail::RoundFailure{to_string(parsed.error->kind()), parsed.error->what(), raw};
            continue;
          }
          const ParsedResponse& p = *parsed.value;
          const std::string& caption = p.at("caption");
          if (word_count(caption) > static_cast<std::size_t>(schema.word_limit)) over_limit.push_back(to_string(round));
          if (round == Round::r1) {
            s.self_caption = caption;
            auto known = [](std::optional<std::string> v) -> std::optional<std::string> {
              if (!v || is_unknown_attribute(*v)) return std::nullopt;
              return v;
            };
            s.color = known(p.get("Color"));
            s.geometry = known(p.get("Geometry"));
          } else if (round == Round::r2) {
            s.relative_caption = caption;
            s.relative_location = p.at("relative_location");
          } else {
            s.absolute_caption = caption;
          }
        }
        s.messages.push_back(prompt.back());
        s.messages.push_back({Role::assistant, raw, std::nullopt});
        accepted = true;
      } catch (const TransportError& e) {
        last = detail::RoundFailure{to_string(e.kind()), e.what(), ""};
      }
    }
    if (!accepted) {
      AnnotationFailure f;
      f.instance_id = instance_id;
      f.round = round;
      f.error_kind = last ? last->kind : "unknown";
      f.message = last ? last->message : "";
      f.raw_response = last ? last->raw : "";
      f.partial = detail::partial_outputs(s);
      result.failure = std::move(f);
      return result;
    }
  }

  SentenceCaptions out;
  out.self_caption = s.self_caption;
  out.relative_caption = s.relative_caption;
  out.absolute_caption = s.absolute_caption;
  out.attributes = {priors.category, priors.size, priors.grid_label, s.color, s.geometry, s.relative_location};
  out.over_limit = std::move(over_limit);
  result.captions = std::move(out);
  return result;
}

// ---------------------------------------------------------------------------
// Dataset driver.

struct AnnotateOptions {
  std::size_t concurrency = 8;
  RetryPolicy retry;
};

struct AnnotateSummary {
  std::size_t records = 0;
  std::size_t instances = 0;
  std::size_t annotated = 0;
  std::size_t failed = 0;
  std::size_t over_limit = 0;
};

/// Foreground crop of the instance's region with the instance outlined.
inline Bytes highlighted_region_png(const PreprocessedRecord& p, std::size_t k, const fs::path& base_dir) {
  const InstancePrep& ip = p.instances.at(k);
  for (std::size_t r = 0; r < p.regions.size(); ++r)
    if (p.regions[r].id == ip.region)
      return encode_png(render_highlight(load_image(base_dir / p.region_crops[r]), ip.box_in_region));
  throw SchemaError(ip.id + ": region '" + ip.region + "' not found");
}

inline Priors priors_of(const PreprocessedRecord& p, std::size_t k) {
  return {p.record.instances.at(k).category, std::string(to_string(p.instances.at(k).size)),
          p.instances.at(k).position.label()};
}

/// Reads `in/preprocessed.jsonl`, annotates every instance and writes
/// `out/annotated.jsonl` (input rows plus an `annotations` array parallel to
/// the instances, null where annotation failed) and `out/failures.jsonl`.
inline AnnotateSummary annotate_dataset(const fs::path& input, const VlmClient& client, const fs::path& out_dir,
                                        const AnnotateOptions& opt = {}) {
  struct Row {
    PreprocessedRecord prep;
    fs::path dir;
  };
  std::vector<Row> rows;
  for (const auto& file : jsonl_inputs(input, "preprocessed.jsonl"))
    for (const auto& j : read_jsonl(file)) rows.push_back({preprocessed_from_json(j), file.parent_path()});
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return record_order(a.prep.record, b.prep.record); });

  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t k = 0; k < rows[r].prep.instances.size(); ++k) jobs.emplace_back(r, k);

  const auto results = parallel_map<AnnotationResult>(jobs.size(), opt.concurrency, [&](std::size_t i) {
    const auto [r, k] = jobs[i];
    const Row& row = rows[r];
    InstanceCrops crops{read_file_bytes(row.dir / row.prep.instances[k].self_crop),
                        highlighted_region_png(row.prep, k, row.dir)};
    return annotate_instance(row.prep.instances[k].id, priors_of(row.prep, k), crops, client, opt.retry);
  });

  fs::create_directories(out_dir);
  AnnotateSummary sum;
  sum.records = rows.size();
  sum.instances = jobs.size();
  std::vector<ordered_json> out_rows, failures;
  std::size_t next = 0;
  for (auto& row : rows) {
    PreprocessedRecord& p = row.prep;
    p.record.image = relative_path(resolve_image(p.record, row.dir), out_dir);
    for (auto& c : p.region_crops) c = relative_path(row.dir / c, out_dir);
    for (auto& ip : p.instances) ip.self_crop = relative_path(row.dir / ip.self_crop, out_dir);
    ordered_json j = to_json(p);
    j["annotations"] = ordered_json::array();
    for (std::size_t k = 0; k < p.instances.size(); ++k, ++next) {
      const AnnotationResult& res = results[next];
      if (res.ok()) {
        ++sum.annotated;
        if (!res.captions->over_limit.empty()) ++sum.over_limit;
        j["annotations"].push_back(to_json(*res.captions));
      } else {
        ++sum.failed;
        j["annotations"].push_back(nullptr);
        failures.push_back(to_json(*res.failure));
      }
    }
    out_rows.push_back(std::move(j));
  }
  write_jsonl(out_dir / "annotated.jsonl", out_rows);
  write_jsonl(out_dir / "failures.jsonl", failures);
  return sum;
}

/// One row of annotated.jsonl.
struct AnnotatedRecord {
  PreprocessedRecord prep;
  std::vector<std::optional<SentenceCaptions>> annotations;  // parallel to prep.instances
};

inline AnnotatedRecord annotated_from_json(const json& j) {
  AnnotatedRecord a;
  a.prep = preprocessed_from_json(j);
  try {
    for (const auto& x : j.at("annotations"))
      a.annotations.push_back(x.is_null() ? std::nullopt : std::optional(captions_from_json(x)));
  } catch (const json::exception& e) {
    throw SchemaError(std::string("annotated record: ") + e.what());
  }
  if (a.annotations.size() != a.prep.instances.size())
    throw SchemaError(a.prep.record.id + ": annotations do not line up with instances");
  return a;
}

}  // namespace w2s

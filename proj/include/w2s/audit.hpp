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
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <set>
#include <string>
#include <vector>

#include "w2s/annotator.hpp"
#include "w2s/parallel.hpp"
#include "w2s/rng.hpp"

namespace w2s {

enum class AuditAttribute { color, geometry, relative_position };

inline constexpr std::array<AuditAttribute, 3> kAuditAttributes{AuditAttribute::color, AuditAttribute::geometry,
                                                               AuditAttribute::relative_position};

inline const char* to_string(AuditAttribute a) {
  switch (a) {
    case AuditAttribute::color: return "color";
    case AuditAttribute::geometry: return "geometry";
    case AuditAttribute::relative_position: return "relative_position";
  }
  return "?";
}

enum class Verdict { yes, no, abstain };

inline const char* to_string(Verdict v) { return v == Verdict::yes ? "yes" : v == Verdict::no ? "no" : "abstain"; }

struct AuditVerdict {
  std::string instance_id;
  AuditAttribute attribute = AuditAttribute::color;
  std::string value;
  Verdict verdict = Verdict::abstain;
  std::string judge;
  std::string raw_response;
  std::string image_id;
};

inline ordered_json to_json(const AuditVerdict& v) {
  return {{"image_id", v.image_id}, {"instance_id", v.instance_id}, {"attribute", to_string(v.attribute)}, {"value", v.value},
          {"verdict", to_string(v.verdict)}, {"judge", v.judge},                  {"raw_response", v.raw_response}};
}

inline std::string judge_prompt(const std::string& value) {
  return "Does the attribute '" + value + "' correctly describe the highlighted object? Answer exactly yes or no.";
}

/// yes/no from a constrained reply: the first word decides, case and
/// punctuation ignored. Anything else is unparseable.
inline std::optional<bool> parse_yes_no(std::string_view reply) {
  std::string word;
  std::size_t i = 0;
  while (i < reply.size() && !std::isalpha(static_cast<unsigned char>(reply[i]))) ++i;
  while (i < reply.size() && std::isalpha(static_cast<unsigned char>(reply[i])))
    word += static_cast<char>(std::tolower(static_cast<unsigned char>(reply[i++])));
  if (word == "yes") return true;
  if (word == "no") return false;
  return std::nullopt;
}

/// Single-round verdict; transport errors and unparseable replies are
/// retried, then recorded as an abstain.
inline AuditVerdict judge_attribute(const VlmClient& judge, const std::string& judge_id, const Bytes& crop_png,
                                    const std::string& instance_id, AuditAttribute attribute, const std::string& value,
                                    const RetryPolicy& retry = {}) {
  AuditVerdict v{instance_id, attribute, value, Verdict::abstain, judge_id, ""};
  const std::vector<Message> msgs{{Role::user, judge_prompt(value), crop_png}};
  for (int attempt = 1; attempt <= retry.attempts; ++attempt) {
    if (attempt > 1) retry.sleep(retry.backoff_before(attempt));
    try {
      v.raw_response = judge.chat(msgs);
    } catch (const TransportError& e) {
      v.raw_response = std::string("transport error: ") + e.what();
      continue;
    }
    if (const auto yn = parse_yes_no(v.raw_response)) {
      v.verdict = *yn ? Verdict::yes : Verdict::no;
      return v;
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// Sampling

struct AuditRow {
  AnnotatedRecord rec;
  fs::path dir;
};

inline std::vector<AuditRow> read_annotated(const fs::path& input) {
  std::vector<AuditRow> rows;
  for (const auto& file : jsonl_inputs(input, "annotated.jsonl"))
    for (const auto& j : read_jsonl(file)) rows.push_back({annotated_from_json(j), file.parent_path()});
  std::sort(rows.begin(), rows.end(),
            [](const AuditRow& a, const AuditRow& b) { return record_order(a.rec.prep.record, b.rec.prep.record); });
  return rows;
}

struct AuditInstance {
  std::size_t row = 0;
  std::size_t k = 0;  // index into the row's instances
};

/// Seeded uniform sample of `n_images` images; every annotated instance of a
/// sampled image is included. Rows must be in record order.
inline std::vector<AuditInstance> sample_audit_set(const std::vector<AuditRow>& rows, std::size_t n_images,
                                                   std::uint64_t seed) {
  if (rows.empty()) throw InvalidArgument("audit: empty corpus");
  if (n_images == 0 || n_images > rows.size())
    throw InvalidArgument("audit: n_images must be in [1, " + std::to_string(rows.size()) + "]");
  std::vector<std::size_t> idx(rows.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = derive_rng(seed, "audit");
  shuffle(idx, rng);
  idx.resize(n_images);
  std::sort(idx.begin(), idx.end());
  std::vector<AuditInstance> out;
  for (std::size_t r : idx)
    for (std::size_t k = 0; k < rows[r].rec.annotations.size(); ++k)
      if (rows[r].rec.annotations[k]) out.push_back({r, k});
  return out;
}

struct JudgeBackend {
  std::string id;
  const VlmClient* client = nullptr;
};

struct AuditOptions {
  std::size_t concurrency = 8;
  RetryPolicy retry;
};

/// One verdict per (instance, known attribute, judge). Colour and geometry
/// are judged on the instance crop, relative position on the highlighted
/// foreground crop.
inline std::vector<AuditVerdict> run_audit(const std::vector<AuditRow>& rows, const std::vector<AuditInstance>& sample,
                                           const std::vector<JudgeBackend>& judges, const AuditOptions& opt = {}) {
  struct Job {
    const AuditInstance* inst;
    AuditAttribute attr;
    std::string value;
    const JudgeBackend* judge;
  };
  std::vector<Job> jobs;
  for (const auto& s : sample) {
    const auto& a = rows[s.row].rec.annotations[s.k]->attributes;
    for (const auto& j : judges) {
      if (a.color) jobs.push_back({&s, AuditAttribute::color, *a.color, &j});
      if (a.geometry) jobs.push_back({&s, AuditAttribute::geometry, *a.geometry, &j});
      if (!a.relative_position.empty()) jobs.push_back({&s, AuditAttribute::relative_position, a.relative_position, &j});
    }
  }
  return parallel_map<AuditVerdict>(jobs.size(), opt.concurrency, [&](std::size_t i) {
    const Job& job = jobs[i];
    const AuditRow& row = rows[job.inst->row];
    const auto& prep = row.rec.prep;
    const Bytes crop = job.attr == AuditAttribute::relative_position
                           ? highlighted_region_png(prep, job.inst->k, row.dir)
                           : read_file_bytes(row.dir / prep.instances[job.inst->k].self_crop);
    AuditVerdict v = judge_attribute(*job.judge->client, job.judge->id, crop, prep.instances[job.inst->k].id, job.attr,
                                     job.value, opt.retry);
    v.image_id = prep.record.id;
    return v;
  });
}

// ---------------------------------------------------------------------------
// Report

struct AttributeTally {
  std::size_t yes = 0, no = 0, abstain = 0;
  double accuracy() const { return static_cast<double>(yes) / static_cast<double>(yes + no); }
};

struct AuditReport {
  std::size_t images = 0;
  std::size_t instances = 0;
  std::map<std::string, std::map<AuditAttribute, AttributeTally>> by_judge;
};

/// Published full-scale accuracies, shown for comparison only.
struct ReferenceAccuracy {
  const char* judge;
  double color, geometry, relative_position;
};
inline constexpr std::array<ReferenceAccuracy, 2> kReferenceAccuracy{
    {{"InternVL3-78B", 0.9898, 0.9921, 0.9790}, {"GPT-4o-mini", 0.9688, 0.9439, 0.9692}}};
inline constexpr std::size_t kReferenceAuditImages = 300;
inline constexpr std::size_t kReferenceAuditInstances = 1765;

inline AuditReport audit_report(const std::vector<AuditVerdict>& verdicts) {
  if (verdicts.empty()) throw InvalidArgument("audit: no verdicts");
  AuditReport r;
  std::set<std::string> images, instances;
  for (const auto& v : verdicts) {
    images.insert(v.image_id);
    instances.insert(v.instance_id);
    auto& t = r.by_judge[v.judge][v.attribute];
    (v.verdict == Verdict::yes ? t.yes : v.verdict == Verdict::no ? t.no : t.abstain) += 1;
  }
  for (const auto& [judge, attrs] : r.by_judge)
    for (const auto& [a, t] : attrs)
      if (t.yes + t.no == 0)
        throw InvalidArgument("audit: judge '" + judge + "' abstained on every " + to_string(a) + " verdict");
  r.images = images.size();
  r.instances = instances.size();
  return r;
}

inline ordered_json to_json(const AuditReport& r) {
  ordered_json j;
  j["images"] = r.images;
  j["instances"] = r.instances;
  j["judges"] = ordered_json::object();
  for (const auto& [judge, attrs] : r.by_judge) {
    ordered_json jj;
    for (const auto& [a, t] : attrs)
      jj[to_string(a)] = {{"accuracy", t.accuracy()}, {"yes", t.yes}, {"no", t.no}, {"abstain", t.abstain}};
    j["judges"][judge] = jj;
  }
  ordered_json ref{{"images", kReferenceAuditImages}, {"instances", kReferenceAuditInstances}};
  for (const auto& x : kReferenceAccuracy)
    ref["accuracy"][x.judge] = {{"color", x.color}, {"geometry", x.geometry}, {"relative_position", x.relative_position}};
  j["reference_full_scale"] = ref;
  return j;
}

inline std::string format_audit(const AuditReport& r) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(2);
  o << "audited " << r.images << " images, " << r.instances << " instances\n";
  o << std::left << std::setw(24) << "judge" << std::setw(10) << "color" << std::setw(10) << "geometry"
    << "relative_position\n";
  for (const auto& [judge, attrs] : r.by_judge) {
    o << std::setw(24) << judge;
    for (auto a : kAuditAttributes) {
      const auto it = attrs.find(a);
      std::ostringstream cell;
      if (it == attrs.end()) cell << "-";
      else cell << std::fixed << std::setprecision(2) << 100.0 * it->second.accuracy();
      o << std::setw(a == AuditAttribute::relative_position ? 0 : 10) << cell.str();
    }
    o << "\n";
  }
  o << "reference (" << kReferenceAuditImages << " images, ~" << kReferenceAuditInstances << " instances)\n";
  for (const auto& x : kReferenceAccuracy)
    o << std::setw(24) << x.judge << std::setw(10) << 100.0 * x.color << std::setw(10) << 100.0 * x.geometry
      << 100.0 * x.relative_position << "\n";
  return o.str();
}

}  // namespace w2s

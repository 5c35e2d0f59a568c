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
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "w2s/dataset.hpp"
#include "w2s/geometry.hpp"
#include "w2s/parallel.hpp"

namespace w2s {

struct Prediction {
  std::string sample_id;
  std::string label;  // detection: predicted class; ignored for grounding
  Box box;
  double score = 0;
};

inline Prediction prediction_from_json(const json& j) {
  try {
    Prediction p;
    p.sample_id = j.at("sample_id").get<std::string>();
    p.label = j.value("label", "");
    p.box = box_from_json(j.at("box"));
    p.score = j.at("score").get<double>();
    if (!p.box.valid()) throw SchemaError(p.sample_id + ": invalid predicted box");
    if (!std::isfinite(p.score)) throw SchemaError(p.sample_id + ": non-finite score");
    return p;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("prediction: ") + e.what());
  }
}

inline ordered_json to_json(const Prediction& p) {
  ordered_json j{{"sample_id", p.sample_id}};
  if (!p.label.empty()) j["label"] = p.label;
  j["box"] = {p.box.x1, p.box.y1, p.box.x2, p.box.y2};
  j["score"] = p.score;
  return j;
}

inline std::vector<Prediction> read_predictions(const fs::path& path) {
  std::vector<Prediction> out;
  for (const auto& j : read_jsonl(path)) out.push_back(prediction_from_json(j));
  return out;
}

// ---------------------------------------------------------------------------
// Detection-style AP / recall

/// One matching scope: predictions only match GT boxes of their own group.
/// AP is computed per `cls` over all groups sharing it.
struct EvalGroup {
  std::string cls;
  std::vector<Box> gts;
};

struct ScoredBox {
  std::size_t group = 0;
  Box box;
  double score = 0;
};

inline constexpr std::array<std::size_t, 3> kRecallKs{1, 10, 100};

struct DetectionMetrics {
  double ap50 = 0;
  std::map<std::size_t, double> recall_at;
  std::size_t groups = 0;
  std::size_t gt_boxes = 0;
  std::size_t predictions = 0;
};

namespace detail {

/// Stable descending-score order of `idx` (ties keep input order).
inline void by_score(std::vector<std::size_t>& idx, const std::vector<ScoredBox>& preds) {
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });
}

/// Matches a prediction to the unmatched GT with the highest IoU >= thr.
inline bool match_one(const Box& p, const std::vector<Box>& gts, std::vector<char>& used, double thr) {
  double best = -1;
  std::size_t best_g = gts.size();
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (used[g]) continue;
    const double v = iou(p, gts[g]);
    if (v >= thr && v > best) {
      best = v;
      best_g = g;
    }
  }
  if (best_g == gts.size()) return false;
  used[best_g] = 1;
  return true;
}

}  // namespace detail

/// All-points interpolated average precision from TP flags in rank order.
inline double average_precision(const std::vector<char>& tp, std::size_t npos) {
  if (npos == 0) return 0.0;
  const std::size_t n = tp.size();
  std::vector<double> prec(n), rec(n);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    hits += tp[i] ? 1 : 0;
    prec[i] = static_cast<double>(hits) / static_cast<double>(i + 1);
    rec[i] = static_cast<double>(hits) / static_cast<double>(npos);
  }
  for (std::size_t i = n; i-- > 1;) prec[i - 1] = std::max(prec[i - 1], prec[i]);
  double ap = 0, prev = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (rec[i] - prev) * prec[i];
    prev = rec[i];
  }
  return ap;
}

inline DetectionMetrics evaluate_detection(const std::vector<ScoredBox>& preds, const std::vector<EvalGroup>& groups,
                                           double iou_thr = 0.5, std::size_t concurrency = 1) {
  for (const auto& p : preds) {
    if (p.group >= groups.size()) throw InvalidArgument("prediction refers to an unknown group");
    if (!std::isfinite(p.score)) throw InvalidArgument("non-finite prediction score");
  }
  DetectionMetrics m;
  m.groups = groups.size();
  m.predictions = preds.size();
  for (const auto& g : groups) m.gt_boxes += g.gts.size();

  std::map<std::string, std::size_t> npos;
  for (const auto& g : groups)
    if (!g.gts.empty()) npos[g.cls] += g.gts.size();
  const std::vector<std::string> classes = [&] {
    std::vector<std::string> v;
    for (const auto& [c, n] : npos) v.push_back(c);
    return v;
  }();
  std::map<std::string, std::size_t> class_index;
  for (std::size_t i = 0; i < classes.size(); ++i) class_index[classes[i]] = i;
  std::vector<std::vector<std::size_t>> per_class(classes.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto it = class_index.find(groups[preds[i].group].cls);
    if (it != class_index.end()) per_class[it->second].push_back(i);
  }

  const auto aps = parallel_map<double>(classes.size(), concurrency, [&](std::size_t c) {
    auto order = per_class[c];
    detail::by_score(order, preds);
    std::map<std::size_t, std::vector<char>> used;
    std::vector<char> tp;
    tp.reserve(order.size());
    for (std::size_t i : order) {
      const auto& g = groups[preds[i].group];
      auto& u = used[preds[i].group];
      u.resize(g.gts.size(), 0);
      tp.push_back(detail::match_one(preds[i].box, g.gts, u, iou_thr) ? 1 : 0);
    }
    return average_precision(tp, npos.at(classes[c]));
  });
  if (!aps.empty()) m.ap50 = std::accumulate(aps.begin(), aps.end(), 0.0) / static_cast<double>(aps.size());

  std::vector<std::vector<std::size_t>> per_group(groups.size());
  for (std::size_t i = 0; i < preds.size(); ++i) per_group[preds[i].group].push_back(i);
  for (auto& v : per_group) detail::by_score(v, preds);
  for (std::size_t k : kRecallKs) {
    std::size_t hit = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      std::vector<char> used(groups[g].gts.size(), 0);
      const std::size_t n = std::min(k, per_group[g].size());
      for (std::size_t r = 0; r < n; ++r)
        hit += detail::match_one(preds[per_group[g][r]].box, groups[g].gts, used, iou_thr) ? 1 : 0;
    }
    m.recall_at[k] = m.gt_boxes ? static_cast<double>(hit) / static_cast<double>(m.gt_boxes) : 0.0;
  }
  return m;
}

// ---------------------------------------------------------------------------
// RSVG (one GT box per sample, best-scored prediction only)

inline constexpr std::array<double, 5> kRsvgThresholds{0.5, 0.6, 0.7, 0.8, 0.9};

struct RsvgMetrics {
  std::array<double, 5> pr{};  // parallel to kRsvgThresholds
  double mean_iou = 0;
  double cum_iou = 0;
  std::size_t samples = 0;
  std::size_t missing = 0;
};

/// `best[i]` is the top prediction for gts[i], if any.
inline RsvgMetrics evaluate_rsvg(const std::vector<Box>& gts, const std::vector<std::optional<Box>>& best) {
  if (gts.size() != best.size()) throw InvalidArgument("rsvg: predictions do not line up with ground truth");
  RsvgMetrics m;
  m.samples = gts.size();
  if (gts.empty()) return m;
  double inter = 0, uni = 0, sum = 0;
  std::array<std::size_t, 5> hits{};
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (!gts[i].valid()) throw InvalidArgument("rsvg: degenerate ground-truth box");
    if (!best[i]) {
      ++m.missing;
      uni += gts[i].area();
      continue;
    }
    const double in = intersection_area(*best[i], gts[i]);
    const double un = best[i]->area() + gts[i].area() - in;
    const double v = iou(*best[i], gts[i]);
    inter += in;
    uni += un;
    sum += v;
    for (std::size_t t = 0; t < kRsvgThresholds.size(); ++t)
      if (v >= kRsvgThresholds[t]) ++hits[t];
  }
  const double n = static_cast<double>(gts.size());
  for (std::size_t t = 0; t < hits.size(); ++t) m.pr[t] = static_cast<double>(hits[t]) / n;
  m.mean_iou = sum / n;
  m.cum_iou = uni > 0 ? inter / uni : 0.0;
  return m;
}

// ---------------------------------------------------------------------------
// Protocols over an emitted dataset

enum class Protocol { detection, phrase, sentence, rsvg };

inline const char* to_string(Protocol p) {
  switch (p) {
    case Protocol::detection: return "detection";
    case Protocol::phrase: return "phrase";
    case Protocol::sentence: return "sentence";
    case Protocol::rsvg: return "rsvg";
  }
  return "?";
}

inline Protocol parse_protocol(const std::string& s) {
  for (auto p : {Protocol::detection, Protocol::phrase, Protocol::sentence, Protocol::rsvg})
    if (s == to_string(p)) return p;
  throw InvalidArgument("unknown protocol '" + s + "'");
}

inline bool in_protocol(const GroundingSample& s, Protocol p) {
  switch (p) {
    case Protocol::detection: return s.task == Task::detection;
    case Protocol::phrase: return s.task == Task::grounding && s.caption_kind.rfind("phrase", 0) == 0;
    case Protocol::sentence: return s.task == Task::grounding && s.caption_kind.rfind("sent", 0) == 0;
    case Protocol::rsvg: return s.task == Task::grounding && s.boxes.size() == 1;
  }
  return false;
}

struct MetricsReport {
  std::string split;
  std::map<Protocol, DetectionMetrics> grounding;  // detection / phrase / sentence
  std::optional<RsvgMetrics> rsvg;
  std::size_t ignored_predictions = 0;  // sample ids outside the evaluated set
};

/// Groups are (sample, class) for detection and (sample, caption) under a
/// single pseudo-class for phrase and sentence grounding.
inline DetectionMetrics evaluate_protocol(const std::vector<GroundingSample>& samples,
                                          const std::vector<Prediction>& preds, Protocol protocol, std::size_t* ignored,
                                          std::size_t concurrency = 1) {
  if (protocol == Protocol::rsvg) throw InvalidArgument("rsvg is scored with evaluate_rsvg_protocol");
  std::vector<EvalGroup> groups;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  std::set<std::string> ids;
  for (const auto& s : samples) {
    if (!in_protocol(s, protocol)) continue;
    ids.insert(s.id);
    if (protocol == Protocol::detection) {
      for (std::size_t b = 0; b < s.boxes.size(); ++b) {
        const auto key = std::make_pair(s.id, s.box_labels[b]);
        auto [it, fresh] = index.emplace(key, groups.size());
        if (fresh) groups.push_back({s.box_labels[b], {}});
        groups[it->second].gts.push_back(s.boxes[b]);
      }
    } else {
      index.emplace(std::make_pair(s.id, std::string()), groups.size());
      groups.push_back({"caption", s.boxes});
    }
  }
  std::vector<ScoredBox> scored;
  std::size_t skipped = 0;
  for (const auto& p : preds) {
    if (!ids.count(p.sample_id)) {
      ++skipped;
      continue;
    }
    std::pair<std::string, std::string> key{p.sample_id, protocol == Protocol::detection ? p.label : std::string()};
    if (protocol == Protocol::detection && p.label.empty())
      throw SchemaError(p.sample_id + ": detection prediction without label");
    auto [it, fresh] = index.emplace(key, groups.size());
    if (fresh) groups.push_back({p.label, {}});  // class absent from this image: every box is a false positive
    scored.push_back({it->second, p.box, p.score});
  }
  if (ignored) *ignored += skipped;
  return evaluate_detection(scored, groups, 0.5, concurrency);
}

inline RsvgMetrics evaluate_rsvg_protocol(const std::vector<GroundingSample>& samples,
                                          const std::vector<Prediction>& preds, std::size_t* ignored) {
  std::map<std::string, const Prediction*> top;
  for (const auto& p : preds) {
    auto [it, fresh] = top.emplace(p.sample_id, &p);
    if (!fresh && p.score > it->second->score) it->second = &p;  // ties keep the earlier prediction
  }
  std::vector<Box> gts;
  std::vector<std::optional<Box>> best;
  std::size_t used = 0;
  for (const auto& s : samples) {
    if (!in_protocol(s, Protocol::rsvg)) continue;
    gts.push_back(s.boxes[0]);
    const auto it = top.find(s.id);
    if (it == top.end()) {
      best.emplace_back();
    } else {
      best.emplace_back(it->second->box);
      ++used;
    }
  }
  if (ignored) *ignored += top.size() - used;
  return evaluate_rsvg(gts, best);
}

inline std::vector<GroundingSample> filter_split(std::vector<GroundingSample> samples, const std::string& split) {
  if (split.empty()) return samples;
  std::erase_if(samples, [&](const GroundingSample& s) { return !s.splits.count(split); });
  return samples;
}

inline MetricsReport evaluate(const std::vector<GroundingSample>& samples, const std::vector<Prediction>& preds,
                              const std::vector<Protocol>& protocols, const std::string& split,
                              std::size_t concurrency = 1) {
  const auto subset = filter_split(samples, split);
  MetricsReport r;
  r.split = split;
  std::size_t ignored = 0;
  for (auto p : protocols) {
    std::size_t skipped = 0;
    if (p == Protocol::rsvg)
      r.rsvg = evaluate_rsvg_protocol(subset, preds, &skipped);
    else
      r.grounding[p] = evaluate_protocol(subset, preds, p, &skipped, concurrency);
    ignored = std::max(ignored, skipped);
  }
  r.ignored_predictions = ignored;
  return r;
}

inline std::string pct(double v) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(2) << 100.0 * v;
  return o.str();
}

inline ordered_json to_json(const MetricsReport& r) {
  ordered_json j;
  j["split"] = r.split;
  for (const auto& [p, m] : r.grounding) {
    ordered_json g{{"ap50", m.ap50}};
    for (const auto& [k, v] : m.recall_at) g["recall@" + std::to_string(k)] = v;
    g["groups"] = m.groups;
    g["gt_boxes"] = m.gt_boxes;
    g["predictions"] = m.predictions;
    j[to_string(p)] = g;
  }
  if (r.rsvg) {
    ordered_json g;
    for (std::size_t t = 0; t < kRsvgThresholds.size(); ++t) {
      std::ostringstream key;
      key << "pr@" << std::fixed << std::setprecision(1) << kRsvgThresholds[t];
      g[key.str()] = r.rsvg->pr[t];
    }
    g["mean_iou"] = r.rsvg->mean_iou;
    g["cum_iou"] = r.rsvg->cum_iou;
    g["samples"] = r.rsvg->samples;
    g["missing_predictions"] = r.rsvg->missing;
    j["rsvg"] = g;
  }
  j["ignored_predictions"] = r.ignored_predictions;
  return j;
}

inline std::string format_report(const MetricsReport& r) {
  std::ostringstream o;
  o << "split " << (r.split.empty() ? "(all)" : r.split) << "\n";
  for (const auto& [p, m] : r.grounding) {
    o << std::left << std::setw(10) << to_string(p) << " AP50 " << pct(m.ap50);
    for (const auto& [k, v] : m.recall_at) o << "  R@" << k << " " << pct(v);
    o << "  (" << m.gt_boxes << " gt, " << m.predictions << " pred)\n";
  }
  if (r.rsvg) {
    o << std::left << std::setw(10) << "rsvg";
    for (std::size_t t = 0; t < kRsvgThresholds.size(); ++t)
      o << " Pr@" << std::setprecision(1) << std::fixed << kRsvgThresholds[t] << " " << pct(r.rsvg->pr[t]);
    o << "  mIoU " << pct(r.rsvg->mean_iou) << "  cIoU " << pct(r.rsvg->cum_iou) << "  (" << r.rsvg->samples
      << " samples)\n";
  }
  if (r.ignored_predictions) o << r.ignored_predictions << " predictions ignored (not in the evaluated set)\n";
  return o.str();
}

}  // namespace w2s

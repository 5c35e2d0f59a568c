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

// Curation store: validation caption-instance pairs reviewed by humans.
// Verdicts go to an append-only JSON Lines log (fsync'd before the call
// returns); state is the replay of that log, optionally starting from a
// compacted snapshot.

#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "w2s/dataset.hpp"

namespace w2s {

enum class ReviewStatus { pending, accepted, rejected };

inline const char* to_string(ReviewStatus s) {
  return s == ReviewStatus::pending ? "pending" : s == ReviewStatus::accepted ? "accepted" : "rejected";
}

inline ReviewStatus parse_status(const std::string& v) {
  if (v == "pending") return ReviewStatus::pending;
  if (v == "accepted") return ReviewStatus::accepted;
  if (v == "rejected") return ReviewStatus::rejected;
  throw InvalidArgument("unknown status '" + v + "'");
}

inline ReviewStatus parse_verdict(const std::string& v) {
  if (v == "accepted" || v == "accept") return ReviewStatus::accepted;
  if (v == "rejected" || v == "reject") return ReviewStatus::rejected;
  throw InvalidArgument("verdict must be 'accepted' or 'rejected', got '" + v + "'");
}

struct VerdictEntry {
  std::uint64_t seq = 0;
  std::string item;
  ReviewStatus verdict = ReviewStatus::accepted;
  std::string reviewer;
  std::int64_t timestamp_ms = 0;
  std::string reason;

  friend bool operator==(const VerdictEntry&, const VerdictEntry&) = default;
};

inline ordered_json to_json(const VerdictEntry& e) {
  ordered_json j{{"seq", e.seq},           {"item", e.item}, {"verdict", to_string(e.verdict)},
                 {"reviewer", e.reviewer}, {"ts", e.timestamp_ms}};
  if (!e.reason.empty()) j["reason"] = e.reason;
  return j;
}

inline VerdictEntry verdict_entry_from_json(const json& j) {
  VerdictEntry e;
  e.seq = j.at("seq").get<std::uint64_t>();
  e.item = j.at("item").get<std::string>();
  e.verdict = parse_verdict(j.at("verdict").get<std::string>());
  e.reviewer = j.at("reviewer").get<std::string>();
  e.timestamp_ms = j.at("ts").get<std::int64_t>();
  e.reason = j.value("reason", "");
  return e;
}

struct ReviewItem {
  std::string id;  // grounding sample id (= caption id)
  std::string category;
  std::string caption;
  std::string image;  // as stored in the dataset, relative to its directory
  std::vector<Box> boxes;
  ReviewStatus status = ReviewStatus::pending;
  std::string reviewer;
  std::int64_t timestamp_ms = 0;
  std::uint64_t decided_seq = 0;  // log position of the verdict that set the status
  std::vector<VerdictEntry> history;

  friend bool operator==(const ReviewItem&, const ReviewItem&) = default;
};

inline ordered_json to_json(const ReviewItem& it, bool with_history = false) {
  ordered_json j;
  j["id"] = it.id;
  j["category"] = it.category;
  j["caption"] = it.caption;
  j["image_url"] = "/items/" + it.id + "/image";
  j["boxes"] = ordered_json::array();
  for (const auto& b : it.boxes) j["boxes"].push_back({b.x1, b.y1, b.x2, b.y2});
  j["status"] = to_string(it.status);
  j["reviewer"] = it.reviewer.empty() ? ordered_json(nullptr) : ordered_json(it.reviewer);
  j["timestamp_ms"] = it.timestamp_ms ? ordered_json(it.timestamp_ms) : ordered_json(nullptr);
  if (with_history) {
    j["history"] = ordered_json::array();
    for (const auto& e : it.history) j["history"].push_back(to_json(e));
  }
  return j;
}

struct ReviewPage {
  std::vector<ReviewItem> items;
  std::optional<std::string> next_cursor;  // nullopt: no further pages
};

struct CategoryCounts {
  std::size_t pending = 0, accepted = 0, rejected = 0;
};

using Clock = std::function<std::int64_t()>;

inline std::int64_t system_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

namespace detail {

inline std::string hex_encode(std::string_view s) {
  static const char* d = "0123456789abcdef";
  std::string out;
  for (unsigned char c : s) {
    out += d[c >> 4];
    out += d[c & 15];
  }
  return out;
}

inline std::string hex_decode(std::string_view s) {
  auto val = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
  };
  if (s.size() % 2) throw InvalidArgument("malformed cursor");
  std::string out;
  for (std::size_t i = 0; i < s.size(); i += 2) {
    const int hi = val(s[i]), lo = val(s[i + 1]);
    if (hi < 0 || lo < 0) throw InvalidArgument("malformed cursor");
    out += static_cast<char>(hi * 16 + lo);
  }
  return out;
}

}  // namespace detail

class ReviewStore {
 public:
  struct Options {
    fs::path log_path;
    fs::path snapshot_path;  // empty: <log>.snapshot
    std::size_t snapshot_every = 1000;
    Clock clock = system_clock_ms;
    // Test hook: runs after a verdict is durable, before it is applied.
    std::function<void(const VerdictEntry&)> after_log;
  };

  ReviewStore(std::vector<ReviewItem> items, Options opt) : opt_(std::move(opt)) {
    if (opt_.log_path.empty()) throw InvalidArgument("review store needs a log path");
    if (opt_.snapshot_path.empty()) opt_.snapshot_path = fs::path(opt_.log_path.string() + ".snapshot");
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (auto& it : items) {
      if (!index_.emplace(it.id, items_.size()).second) throw InvalidArgument("duplicate review item " + it.id);
      items_.push_back(std::move(it));
    }
    load_snapshot();
    replay_log();
    if (opt_.log_path.has_parent_path()) fs::create_directories(opt_.log_path.parent_path());
    fd_ = ::open(opt_.log_path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd_ < 0) throw Error("cannot open review log " + opt_.log_path.string());
  }

  ~ReviewStore() {
    if (fd_ >= 0) ::close(fd_);
  }
  ReviewStore(const ReviewStore&) = delete;
  ReviewStore& operator=(const ReviewStore&) = delete;

  /// Items drawn from grounding samples (one per caption-instance pair).
  static std::vector<ReviewItem> items_from_samples(const std::vector<GroundingSample>& samples,
                                                    const std::string& split = "ValFT") {
    std::vector<ReviewItem> out;
    for (const auto& s : samples) {
      if (s.task != Task::grounding || (!split.empty() && !s.splits.count(split))) continue;
      ReviewItem it;
      it.id = s.id;
      it.category = s.categories.at(0);
      it.caption = s.text;
      it.image = s.image;
      it.boxes = s.boxes;
      out.push_back(std::move(it));
    }
    return out;
  }

  std::map<std::string, CategoryCounts> categories() const {
    std::lock_guard lock(mu_);
    std::map<std::string, CategoryCounts> out;
    for (const auto& it : items_) {
      auto& c = out[it.category];
      (it.status == ReviewStatus::pending ? c.pending : it.status == ReviewStatus::accepted ? c.accepted : c.rejected) +=
          1;
    }
    return out;
  }

  /// Pending items first, then reviewed ones; by id within each group. The
  /// cursor encodes the last key served, so pages never skip an item.
  ReviewPage list(const std::string& category, const std::string& cursor = {}, std::size_t page_size = 50,
                  std::optional<ReviewStatus> status = std::nullopt) const {
    if (page_size == 0) throw InvalidArgument("page_size must be positive");
    std::lock_guard lock(mu_);
    std::vector<const ReviewItem*> cat;
    bool known = false;
    for (const auto& it : items_) {
      if (it.category != category) continue;
      known = true;
      if (!status || it.status == *status) cat.push_back(&it);
    }
    if (!known) throw NotFound("unknown category '" + category + "'");
    std::sort(cat.begin(), cat.end(), [](const ReviewItem* a, const ReviewItem* b) { return key(*a) < key(*b); });
    auto begin = cat.begin();
    if (!cursor.empty()) {
      const std::string after = detail::hex_decode(cursor);
      begin = std::upper_bound(cat.begin(), cat.end(), after, [](const std::string& k, const ReviewItem* it) {
        return k < key(*it);
      });
    }
    ReviewPage page;
    for (auto it = begin; it != cat.end() && page.items.size() < page_size; ++it) page.items.push_back(**it);
    const bool more = begin + static_cast<std::ptrdiff_t>(page.items.size()) != cat.end();
    if (more) page.next_cursor = detail::hex_encode(key(page.items.back()));
    return page;
  }

  ReviewItem get(const std::string& id) const {
    std::lock_guard lock(mu_);
    return items_.at(find(id));
  }

  /// Durable before return: the entry is written and fsync'd, then applied.
  ReviewItem record_verdict(const std::string& id, const std::string& verdict, const std::string& reviewer,
                            const std::string& reason = {}) {
    const ReviewStatus v = parse_verdict(verdict);
    if (reviewer.empty()) throw InvalidArgument("reviewer id required");
    std::lock_guard lock(mu_);
    const std::size_t idx = find(id);
    VerdictEntry e{next_seq_, id, v, reviewer, opt_.clock(), reason};
    append(e);
    ++next_seq_;
    if (opt_.after_log) opt_.after_log(e);
    apply(e);
    if (opt_.snapshot_every && ++since_snapshot_ >= opt_.snapshot_every) write_snapshot_locked();
    return items_[idx];
  }

  /// Accepted items, at most `cap` per category in acceptance order, as
  /// dataset samples tagged Test.
  std::vector<GroundingSample> export_test_set(const std::vector<GroundingSample>& source, std::size_t cap = 100) const {
    std::lock_guard lock(mu_);
    std::map<std::string, std::vector<const ReviewItem*>> by_cat;
    for (const auto& it : items_)
      if (it.status == ReviewStatus::accepted) by_cat[it.category].push_back(&it);
    std::set<std::string> keep;
    for (auto& [c, v] : by_cat) {
      std::sort(v.begin(), v.end(), [](const ReviewItem* a, const ReviewItem* b) { return a->decided_seq < b->decided_seq; });
      for (std::size_t i = 0; i < v.size() && i < cap; ++i) keep.insert(v[i]->id);
    }
    std::vector<GroundingSample> out;
    for (const auto& s : source) {
      if (s.task != Task::grounding || !keep.count(s.id)) continue;
      GroundingSample t = s;
      t.splits = {"Test"};
      t.prompt.reset();
      out.push_back(std::move(t));
      keep.erase(s.id);  // one sample per item even if the source repeats it
    }
    std::sort(out.begin(), out.end(), sample_order);
    return out;
  }

  void write_snapshot() {
    std::lock_guard lock(mu_);
    write_snapshot_locked();
  }

  std::vector<ReviewItem> items() const {
    std::lock_guard lock(mu_);
    return items_;
  }

  std::uint64_t next_seq() const {
    std::lock_guard lock(mu_);
    return next_seq_;
  }

 private:
  static std::string key(const ReviewItem& it) {
    return std::string(it.status == ReviewStatus::pending ? "0" : "1") + '\x1f' + it.id;
  }

  std::size_t find(const std::string& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) throw NotFound("unknown item '" + id + "'");
    return it->second;
  }

  void apply(const VerdictEntry& e) {
    const auto it = index_.find(e.item);
    if (it == index_.end()) return;  // item no longer in the dataset
    ReviewItem& item = items_[it->second];
    // A repeated verdict keeps its original position in export order.
    if (item.status != e.verdict) item.decided_seq = e.seq + 1;
    item.status = e.verdict;
    item.reviewer = e.reviewer;
    item.timestamp_ms = e.timestamp_ms;
    item.history.push_back(e);
  }

  void append(const VerdictEntry& e) {
    const std::string line = to_json(e).dump() + "\n";
    std::size_t off = 0;
    while (off < line.size()) {
      const ssize_t n = ::write(fd_, line.data() + off, line.size() - off);
      if (n < 0) throw Error("review log write failed");
      off += static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) throw Error("review log fsync failed");
  }

  void load_snapshot() {
    if (!fs::exists(opt_.snapshot_path)) return;
    std::ifstream in(opt_.snapshot_path);
    json j;
    try {
      j = json::parse(in);
      next_seq_ = j.at("next_seq").get<std::uint64_t>();
      for (const auto& [id, s] : j.at("items").items()) {
        const auto it = index_.find(id);
        if (it == index_.end()) continue;
        ReviewItem& item = items_[it->second];
        item.status = s.at("status") == "accepted" ? ReviewStatus::accepted : ReviewStatus::rejected;
        item.reviewer = s.at("reviewer").get<std::string>();
        item.timestamp_ms = s.at("ts").get<std::int64_t>();
        item.decided_seq = s.at("decided_seq").get<std::uint64_t>();
        for (const auto& h : s.at("history")) item.history.push_back(verdict_entry_from_json(h));
      }
    } catch (const json::exception& e) {
      throw ParseError(opt_.snapshot_path.string(), 0, e.what());
    }
  }

  /// Applies log entries past the snapshot. A final line without its newline
  /// is a write cut short by a crash: it was never acknowledged, so it is
  /// dropped and the file truncated back to the last complete entry.
  void replay_log() {
    if (!fs::exists(opt_.log_path)) return;
    std::ifstream in(opt_.log_path, std::ios::binary);
    const std::string text{std::istreambuf_iterator<char>(in), {}};
    std::size_t pos = 0, line_no = 0, good_end = 0;
    while (pos < text.size()) {
      const std::size_t nl = text.find('\n', pos);
      ++line_no;
      if (nl == std::string::npos) break;
      const std::string line = text.substr(pos, nl - pos);
      pos = nl + 1;
      good_end = pos;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      VerdictEntry e;
      try {
        e = verdict_entry_from_json(json::parse(line));
      } catch (const std::exception& ex) {
        throw ParseError(opt_.log_path.string(), line_no, ex.what());
      }
      if (e.seq < next_seq_) continue;  // already in the snapshot
      apply(e);
      next_seq_ = e.seq + 1;
    }
    if (good_end < text.size()) fs::resize_file(opt_.log_path, good_end);
  }

  void write_snapshot_locked() {
    ordered_json j;
    j["next_seq"] = next_seq_;
    j["items"] = ordered_json::object();
    for (const auto& it : items_) {
      if (it.status == ReviewStatus::pending) continue;
      ordered_json s{{"status", to_string(it.status)},
                     {"reviewer", it.reviewer},
                     {"ts", it.timestamp_ms},
                     {"decided_seq", it.decided_seq},
                     {"history", ordered_json::array()}};
      for (const auto& h : it.history) s["history"].push_back(to_json(h));
      j["items"][it.id] = s;
    }
    const fs::path tmp = opt_.snapshot_path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << j.dump() << "\n";
      if (!out) throw Error("cannot write snapshot " + tmp.string());
    }
    fs::rename(tmp, opt_.snapshot_path);
    since_snapshot_ = 0;
  }

  Options opt_;
  std::vector<ReviewItem> items_;
  std::map<std::string, std::size_t> index_;
  std::uint64_t next_seq_ = 0;
  std::size_t since_snapshot_ = 0;
  int fd_ = -1;
  mutable std::mutex mu_;
};

}  // namespace w2s

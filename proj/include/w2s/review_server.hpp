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

// HTTP JSON API over a ReviewStore.
//
//   GET  /categories
//   GET  /items?category=&cursor=&page_size=&status=
//   GET  /items/{id}
//   POST /items/{id}/verdict      {"verdict":"accepted"|"rejected","reason":...}, X-Reviewer header
//   GET  /items/{id}/image        raw bytes, boxes in the X-Boxes header
//   GET  /export?cap=             JSON Lines of Test-tagged samples

#pragma once

#include <thread>

#include <httplib.h>

#include "w2s/image.hpp"
#include "w2s/review.hpp"

namespace w2s {

class ReviewServer {
 public:
  ReviewServer(ReviewStore& store, std::vector<GroundingSample> source, fs::path dataset_dir)
      : store_(store), source_(std::move(source)), dataset_dir_(std::move(dataset_dir)) {
    routes();
  }

  ~ReviewServer() { stop(); }

  /// Binds (port 0 picks a free one) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return bound;
  }

  /// Binds and serves on the calling thread until stop().
  void run(const std::string& host, int port) {
    if (!server_.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  static void send_json(httplib::Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& msg) {
    send_json(res, status, {{"error", msg}});
  }

  template <typename Fn>
  static auto guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const NotFound& e) {
        send_error(res, 404, e.what());
      } catch (const InvalidArgument& e) {
        send_error(res, 400, e.what());
      } catch (const json::exception& e) {
        send_error(res, 400, std::string("bad request body: ") + e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    };
  }

  static std::size_t size_param(const httplib::Request& req, const std::string& name, std::size_t fallback) {
    if (!req.has_param(name)) return fallback;
    const std::string v = req.get_param_value(name);
    std::size_t used = 0;
    unsigned long long n = 0;
    try {
      n = std::stoull(v, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != v.size() || v.empty() || v[0] == '-') throw InvalidArgument(name + " must be a non-negative integer");
    return static_cast<std::size_t>(n);
  }

  static std::string content_type_of(const fs::path& p) {
    std::string ext = p.extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".png") return "image/png";
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    if (ext == ".tif" || ext == ".tiff") return "image/tiff";
    return "application/octet-stream";
  }

  void routes() {
    server_.Get("/categories", guarded([this](const httplib::Request&, httplib::Response& res) {
                  ordered_json out = ordered_json::array();
                  for (const auto& [name, c] : store_.categories())
                    out.push_back({{"name", name}, {"pending", c.pending}, {"accepted", c.accepted}, {"rejected", c.rejected}});
                  send_json(res, 200, {{"categories", out}});
                }));

    server_.Get("/items", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  if (!req.has_param("category")) throw InvalidArgument("category parameter required");
                  std::optional<ReviewStatus> status;
                  if (req.has_param("status")) status = parse_status(req.get_param_value("status"));
                  const auto page = store_.list(req.get_param_value("category"), req.get_param_value("cursor"),
                                                size_param(req, "page_size", 50), status);
                  ordered_json items = ordered_json::array();
                  for (const auto& it : page.items) items.push_back(to_json(it));
                  send_json(res, 200,
                            {{"items", items},
                             {"next_cursor", page.next_cursor ? ordered_json(*page.next_cursor) : ordered_json(nullptr)}});
                }));

    server_.Get(R"(/items/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  send_json(res, 200, to_json(store_.get(req.matches[1]), true));
                }));

    server_.Post(R"(/items/([^/]+)/verdict)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                   const std::string reviewer = req.get_header_value("X-Reviewer");
                   if (reviewer.empty()) throw InvalidArgument("X-Reviewer header required");
                   const json body = json::parse(req.body);
                   const auto it = store_.record_verdict(req.matches[1], body.at("verdict").get<std::string>(), reviewer,
                                                         body.value("reason", ""));
                   send_json(res, 200, to_json(it, true));
                 }));

    server_.Get(R"(/items/([^/]+)/image)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const ReviewItem it = store_.get(req.matches[1]);
                  const fs::path p = fs::path(it.image).is_absolute() ? fs::path(it.image) : dataset_dir_ / it.image;
                  if (!fs::exists(p)) throw NotFound("image for '" + it.id + "' is missing");
                  const Bytes bytes = read_file_bytes(p);
                  ordered_json boxes = ordered_json::array();
                  for (const auto& b : it.boxes) boxes.push_back({b.x1, b.y1, b.x2, b.y2});
                  res.set_header("X-Boxes", boxes.dump());
                  res.set_content(std::string(bytes.begin(), bytes.end()), content_type_of(p));
                }));

    server_.Get("/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  std::string body;
                  for (const auto& s : store_.export_test_set(source_, size_param(req, "cap", 100)))
                    body += to_json(s).dump() + "\n";
                  res.set_content(body, "application/x-ndjson");
                }));
  }

  ReviewStore& store_;
  std::vector<GroundingSample> source_;
  fs::path dataset_dir_;
  httplib::Server server_;
  std::thread thread_;
};

}  // namespace w2s

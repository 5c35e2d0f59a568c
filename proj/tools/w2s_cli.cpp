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

#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "w2s/audit.hpp"
#include "w2s/dataset.hpp"
#include "w2s/eval.hpp"
#include "w2s/mock_vlm.hpp"
#include "w2s/pipeline.hpp"
#include "w2s/review_server.hpp"

namespace {

using namespace w2s;

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
}

std::unique_ptr<SimilarityBackend> make_similarity(const std::string& kind, const std::string& embed_url) {
  if (kind == "exact") return std::make_unique<ExactSimilarity>();
  std::shared_ptr<const Embedder> emb;
  if (embed_url.empty())
    emb = std::make_shared<TrigramEmbedder>(256);
  else
    emb = std::make_shared<HttpEmbedder>(embed_url);
  return std::make_unique<EmbeddingSimilarity>(emb);
}

struct Args {
  std::vector<std::string> datasets;
  std::string in, out, backend, similarity = "exact", embed_url, splits, gt, pred, report, protocol = "all",
                           split = "ValFT", log, host = "127.0.0.1", data;
  std::vector<std::string> judges;
  int tile = 1024, overlap = 200, port = 8080;
  double min_visible = 0.5, threshold = 0.90, val_zsd = 1.0;
  std::size_t concurrency = 8, quota = 12, n = 300;
  std::uint64_t seed = 0;
  bool as_json = false;
};

TileOptions tile_options(const Args& a) {
  TileOptions t;
  t.tile = a.tile;
  t.overlap = a.overlap;
  t.min_visible = a.min_visible;
  return t;
}

BuildOptions build_options(const Args& a) {
  BuildOptions b;
  b.spec = a.splits.empty() ? default_split_spec() : load_split_spec(a.splits);
  b.seed = a.seed;
  b.quota = a.quota;
  b.val_fraction_zsd = a.val_zsd;
  b.concurrency = a.concurrency;
  return b;
}

int cmd_ingest(const Args& a) {
  IngestSummary total;
  for (const auto& cfg : a.datasets) {
    const auto s = ingest_dataset(load_descriptor(cfg), a.out, tile_options(a), a.concurrency);
    std::cout << cfg << ": " << s.images << " images, " << s.records << " records, " << s.instances
              << " instances, " << s.dropped_boxes << " boxes dropped\n";
    total.records += s.records;
  }
  std::cout << "wrote " << total.records << " records to " << a.out << "\n";
  return 0;
}

int cmd_preprocess(const Args& a) {
  PreprocessOptions o;
  o.concurrency = a.concurrency;
  const auto n = preprocess_dataset(a.in, a.out, o);
  std::cout << "preprocessed " << n << " records into " << a.out << "\n";
  return 0;
}

int cmd_annotate(const Args& a) {
  const auto client = make_vlm_client(load_backend_config(a.backend));
  AnnotateOptions o;
  o.concurrency = a.concurrency;
  const auto s = annotate_dataset(a.in, *client, a.out, o);
  std::cout << s.instances << " instances: " << s.annotated << " annotated, " << s.failed << " failed, "
            << s.over_limit << " over word limit\n";
  return 0;
}

int cmd_postprocess(const Args& a) {
  const auto sim = make_similarity(a.similarity, a.embed_url);
  PostprocessOptions o;
  o.concurrency = a.concurrency;
  o.match.threshold = a.threshold;
  const auto s = postprocess_dataset(a.in, *sim, a.out, o);
  for (const auto& w : s.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << s.records << " records, " << s.captions << " captions, " << s.pairs << " pairs, " << s.unmatched
            << " unmatched\n";
  return 0;
}

int cmd_build(const Args& a) {
  const auto s = build_dataset(a.in, a.out, build_options(a));
  std::cout << s.samples << " samples over " << s.images << " images, sha256 " << s.sha256 << "\n";
  return 0;
}

int cmd_stats(const Args& a) {
  const auto st = compute_statistics(read_samples(a.in));
  std::cout << (a.as_json ? to_json(st).dump(2) + "\n" : format_statistics(st));
  return 0;
}

int cmd_eval(const Args& a) {
  std::vector<Protocol> protocols;
  if (a.protocol == "all")
    protocols = {Protocol::detection, Protocol::phrase, Protocol::sentence, Protocol::rsvg};
  else
    protocols = {parse_protocol(a.protocol)};
  const auto r = evaluate(read_samples(a.gt), read_predictions(a.pred), protocols, a.split, a.concurrency);
  std::cout << format_report(r);
  if (!a.report.empty()) write_text(a.report, to_json(r).dump(2) + "\n");
  return 0;
}

int cmd_audit(const Args& a) {
  const auto rows = read_annotated(a.data);
  const auto sample = sample_audit_set(rows, a.n, a.seed);
  std::vector<std::unique_ptr<VlmClient>> clients;
  std::vector<JudgeBackend> judges;
  for (const auto& cfg : a.judges) {
    const auto bc = load_backend_config(cfg);
    clients.push_back(make_vlm_client(bc));
    judges.push_back({bc.model.empty() ? fs::path(cfg).stem().string() : bc.model, clients.back().get()});
  }
  AuditOptions o;
  o.concurrency = a.concurrency;
  const auto report = audit_report(run_audit(rows, sample, judges, o));
  std::cout << format_audit(report);
  if (!a.report.empty()) write_text(a.report, to_json(report).dump(2) + "\n");
  return 0;
}

httplib::Server* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve_review(const Args& a) {
  auto samples = read_samples(a.data);
  ReviewStore::Options o;
  o.log_path = a.log;
  ReviewStore store(ReviewStore::items_from_samples(samples), o);
  const fs::path dir = fs::is_directory(a.data) ? fs::path(a.data) : fs::path(a.data).parent_path();
  ReviewServer server(store, std::move(samples), dir);
  std::cout << "review service on http://" << a.host << ":" << a.port << "\n" << std::flush;
  server.run(a.host, a.port);
  return 0;
}

int cmd_serve_mock_vlm(const Args& a) {
  httplib::Server server;
  add_mock_vlm_routes(server);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "mock VLM on http://" << a.host << ":" << a.port << "/v1/chat/completions\n" << std::flush;
  if (!server.listen(a.host, a.port)) throw Error("cannot listen on " + a.host + ":" + std::to_string(a.port));
  return 0;
}

int cmd_run(const Args& a) {
  const auto client = make_vlm_client(load_backend_config(a.backend));
  const auto sim = make_similarity(a.similarity, a.embed_url);
  PipelineOptions o;
  o.tile = tile_options(a);
  o.build = build_options(a);
  o.postprocess.match.threshold = a.threshold;
  o.set_concurrency(a.concurrency);
  std::vector<fs::path> cfgs(a.datasets.begin(), a.datasets.end());
  const auto s = run_pipeline(cfgs, a.out, *client, *sim, o);
  std::cout << s.images << " images, " << s.records << " records, " << s.instances << " instances\n"
            << s.annotate.annotated << " annotated, " << s.annotate.failed << " failed\n"
            << s.postprocess.pairs << " caption-instance pairs\n"
            << s.build.samples << " samples, sha256 " << s.build.sha256 << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Remote-sensing grounding label engine"};
  app.require_subcommand(1);
  Args a;

  auto add_tiling = [&](CLI::App* c) {
    c->add_option("--tile", a.tile, "Tile edge in pixels")->check(CLI::PositiveNumber);
    c->add_option("--overlap", a.overlap, "Tile overlap in pixels")->check(CLI::NonNegativeNumber);
    c->add_option("--min-visible", a.min_visible, "Keep clipped boxes with at least this visible fraction")
        ->check(CLI::Range(0.0, 1.0));
  };
  auto add_concurrency = [&](CLI::App* c, std::size_t def) {
    a.concurrency = def;
    c->add_option("--concurrency,-j", a.concurrency, "Worker threads")->check(CLI::PositiveNumber);
  };
  auto add_similarity = [&](CLI::App* c) {
    c->add_option("--similarity", a.similarity, "Attribute match backend")
        ->check(CLI::IsMember({"exact", "embedding"}));
    c->add_option("--embed-url", a.embed_url, "Embedding service URL (default: local trigram embedder)");
    c->add_option("--threshold", a.threshold, "Cosine threshold for embedding matches")->check(CLI::Range(0.0, 1.0));
  };
  auto add_build = [&](CLI::App* c) {
    c->add_option("--splits", a.splits, "Base/novel split config")->check(CLI::ExistingFile);
    c->add_option("--seed", a.seed, "Random seed");
    c->add_option("--quota", a.quota, "Grounding captions per image")->check(CLI::PositiveNumber);
    c->add_option("--val-zsd-fraction", a.val_zsd, "Fraction of eligible images kept for ValZSD")
        ->check(CLI::Range(0.0, 1.0));
  };

  auto* ingest = app.add_subcommand("ingest", "Parse source annotations and tile images");
  ingest->add_option("--dataset", a.datasets, "Source dataset descriptor (repeatable)")->required()
      ->check(CLI::ExistingFile);
  ingest->add_option("--out", a.out)->required();
  add_tiling(ingest);
  add_concurrency(ingest, 8);

  auto* pre = app.add_subcommand("preprocess", "Compute size and position priors and crops");
  pre->add_option("--in", a.in)->required()->check(CLI::ExistingPath);
  pre->add_option("--out", a.out)->required();
  add_concurrency(pre, 8);

  auto* ann = app.add_subcommand("annotate", "Run the VLM attribute conversation per instance");
  ann->add_option("--in", a.in)->required()->check(CLI::ExistingPath);
  ann->add_option("--backend", a.backend, "VLM backend config")->required()->check(CLI::ExistingFile);
  ann->add_option("--out", a.out)->required();
  add_concurrency(ann, 8);

  auto* post = app.add_subcommand("postprocess", "Generate captions and match them to instances");
  post->add_option("--in", a.in)->required()->check(CLI::ExistingPath);
  post->add_option("--out", a.out)->required();
  add_similarity(post);
  add_concurrency(post, 8);

  auto* build = app.add_subcommand("build", "Sample captions, assign splits and write the dataset");
  build->add_option("--in", a.in)->required()->check(CLI::ExistingPath);
  build->add_option("--out", a.out)->required();
  add_build(build);
  add_concurrency(build, 8);

  auto* stats = app.add_subcommand("stats", "Print dataset statistics");
  stats->add_option("--in", a.in)->required()->check(CLI::ExistingPath);
  stats->add_flag("--json", a.as_json);

  auto* ev = app.add_subcommand("eval", "Score predictions against a built dataset");
  ev->add_option("--gt", a.gt)->required()->check(CLI::ExistingPath);
  ev->add_option("--pred", a.pred)->required()->check(CLI::ExistingFile);
  ev->add_option("--protocol", a.protocol)->check(CLI::IsMember({"detection", "phrase", "sentence", "rsvg", "all"}));
  ev->add_option("--split", a.split, "Split tag to evaluate (empty: all samples)");
  ev->add_option("--report", a.report, "JSON report path");
  add_concurrency(ev, 8);

  auto* audit = app.add_subcommand("audit", "Judge sampled attributes with one or more VLMs");
  audit->add_option("--dataset", a.data, "annotate stage output")->required()->check(CLI::ExistingPath);
  audit->add_option("--judge", a.judges, "Judge backend config (repeatable)")->required()->check(CLI::ExistingFile);
  audit->add_option("--n", a.n, "Images to sample")->check(CLI::PositiveNumber);
  audit->add_option("--seed", a.seed);
  audit->add_option("--report", a.report, "JSON report path");
  add_concurrency(audit, 8);

  auto* review = app.add_subcommand("serve-review", "Serve the human review API");
  review->add_option("--data", a.data, "Built dataset directory or dataset.jsonl")->required()
      ->check(CLI::ExistingPath);
  review->add_option("--log", a.log, "Verdict log path")->required();
  review->add_option("--host", a.host);
  review->add_option("--port", a.port)->check(CLI::Range(1, 65535));

  auto* mock = app.add_subcommand("serve-mock-vlm", "Serve the deterministic mock VLM over HTTP");
  mock->add_option("--host", a.host);
  mock->add_option("--port", a.port)->check(CLI::Range(1, 65535));

  auto* run = app.add_subcommand("run", "Run every stage from ingest to build");
  run->add_option("--dataset", a.datasets)->required()->check(CLI::ExistingFile);
  run->add_option("--backend", a.backend)->required()->check(CLI::ExistingFile);
  run->add_option("--out", a.out, "Work directory")->required();
  add_tiling(run);
  add_similarity(run);
  add_build(run);
  add_concurrency(run, 8);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(a);
    if (*pre) return cmd_preprocess(a);
    if (*ann) return cmd_annotate(a);
    if (*post) return cmd_postprocess(a);
    if (*build) return cmd_build(a);
    if (*stats) return cmd_stats(a);
    if (*ev) return cmd_eval(a);
    if (*audit) return cmd_audit(a);
    if (*review) return cmd_serve_review(a);
    if (*mock) return cmd_serve_mock_vlm(a);
    if (*run) return cmd_run(a);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

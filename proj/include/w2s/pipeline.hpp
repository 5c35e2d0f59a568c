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

// All stages chained over one work directory:
//   work/ingest  work/preprocess  work/annotate  work/postprocess  work/dataset

#pragma once

#include <string>
#include <vector>

#include "w2s/annotator.hpp"
#include "w2s/dataset.hpp"
#include "w2s/ingest.hpp"
#include "w2s/postprocess.hpp"
#include "w2s/preprocess.hpp"

namespace w2s {

struct PipelineOptions {
  TileOptions tile;
  PreprocessOptions preprocess;
  AnnotateOptions annotate;
  PostprocessOptions postprocess;
  BuildOptions build;

  void set_concurrency(std::size_t n) {
    preprocess.concurrency = annotate.concurrency = postprocess.concurrency = build.concurrency = n;
  }
};

struct PipelineSummary {
  std::size_t images = 0;
  std::size_t records = 0;
  std::size_t instances = 0;
  AnnotateSummary annotate;
  PostprocessSummary postprocess;
  BuildSummary build;
};

struct StageDirs {
  fs::path ingest, preprocess, annotate, postprocess, dataset;
  explicit StageDirs(const fs::path& work)
      : ingest(work / "ingest"),
        preprocess(work / "preprocess"),
        annotate(work / "annotate"),
        postprocess(work / "postprocess"),
        dataset(work / "dataset") {}
};

/// Runs ingest through annotate.
inline PipelineSummary run_labeling(const std::vector<fs::path>& descriptor_cfgs, const fs::path& work,
                                    const VlmClient& vlm, const PipelineOptions& opt) {
  const StageDirs d(work);
  PipelineSummary sum;
  for (const auto& cfg : descriptor_cfgs) {
    const auto s = ingest_dataset(load_descriptor(cfg), d.ingest, opt.tile, opt.preprocess.concurrency);
    sum.images += s.images;
    sum.records += s.records;
    sum.instances += s.instances;
  }
  preprocess_dataset(d.ingest, d.preprocess, opt.preprocess);
  sum.annotate = annotate_dataset(d.preprocess, vlm, d.annotate, opt.annotate);
  return sum;
}

inline PipelineSummary run_pipeline(const std::vector<fs::path>& descriptor_cfgs, const fs::path& work,
                                    const VlmClient& vlm, const SimilarityBackend& sim, const PipelineOptions& opt) {
  const StageDirs d(work);
  PipelineSummary sum = run_labeling(descriptor_cfgs, work, vlm, opt);
  sum.postprocess = postprocess_dataset(d.annotate, sim, d.postprocess, opt.postprocess);
  sum.build = build_dataset(d.postprocess, d.dataset, opt.build);
  return sum;
}

}  // namespace w2s

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

#include <atomic>
#include <random>

#include <gtest/gtest.h>

#include "w2s/audit.hpp"
#include "w2s/mock_vlm.hpp"
#include "w2s/pipeline.hpp"

namespace w2s {
namespace {

const fs::path kFixture = fs::path(W2S_TEST_DATA_DIR) / "fixture";

std::vector<fs::path> fixture_cfgs() {
  return {kFixture / "diorlike.cfg", kFixture / "dotalike.cfg", kFixture / "tsvlike.cfg", kFixture / "xviewlike.cfg"};
}

class FixedJudge : public VlmClient {
 public:
  explicit FixedJudge(std::string reply) : reply_(std::move(reply)) {}
  std::string chat(std::span<const Message>) const override {
    ++calls;
    return reply_;
  }
  mutable std::atomic<int> calls{0};

 private:
  std::string reply_;
};

RetryPolicy no_sleep() {
  RetryPolicy r;
  r.sleep = [](std::chrono::milliseconds) {};
  return r;
}

// Annotated fixture shared by the tests below.
class AuditFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    work_ = fs::temp_directory_path() / "w2s_audit_work";
    fs::remove_all(work_);
    PipelineOptions opt;
    opt.set_concurrency(4);
    run_labeling(fixture_cfgs(), work_, MockVlmClient{}, opt);
    rows_ = new std::vector<AuditRow>(read_annotated(work_ / "annotate"));
  }
  static void TearDownTestSuite() {
    delete rows_;
    fs::remove_all(work_);
  }
  static inline fs::path work_;
  static inline std::vector<AuditRow>* rows_ = nullptr;
};

TEST(YesNo, Parsing) {
  EXPECT_EQ(parse_yes_no("yes"), true);
  EXPECT_EQ(parse_yes_no("  Yes."), true);
  EXPECT_EQ(parse_yes_no("\"NO\""), false);
  EXPECT_EQ(parse_yes_no("No, it is red."), false);
  EXPECT_EQ(parse_yes_no("yesterday"), std::nullopt);
  EXPECT_EQ(parse_yes_no("I think yes"), std::nullopt);
  EXPECT_EQ(parse_yes_no(""), std::nullopt);
}

TEST(Judge, RetriesThenAbstains) {
  FixedJudge judge("maybe");
  int sleeps = 0;
  RetryPolicy r;
  r.sleep = [&](std::chrono::milliseconds) { ++sleeps; };
  const auto v = judge_attribute(judge, "j", {}, "i", AuditAttribute::color, "white", r);
  EXPECT_EQ(v.verdict, Verdict::abstain);
  EXPECT_EQ(judge.calls, 3);
  EXPECT_EQ(sleeps, 2);
  EXPECT_EQ(v.raw_response, "maybe");
}

TEST(Judge, PromptIsConstrained) {
  EXPECT_EQ(judge_prompt("white"),
            "Does the attribute 'white' correctly describe the highlighted object? Answer exactly yes or no.");
}

TEST(Report, CountsAndAbstainExclusion) {
  std::vector<AuditVerdict> vs;
  for (int i = 0; i < 99; ++i) vs.push_back({"i" + std::to_string(i), AuditAttribute::color, "w", Verdict::yes, "j", ""});
  vs.push_back({"x", AuditAttribute::color, "w", Verdict::no, "j", ""});
  EXPECT_DOUBLE_EQ(audit_report(vs).by_judge.at("j").at(AuditAttribute::color).accuracy(), 0.99);

  std::vector<AuditVerdict> ten;
  for (int i = 0; i < 10; ++i)
    ten.push_back({"i", AuditAttribute::geometry, "g", i < 2 ? Verdict::abstain : i < 6 ? Verdict::yes : Verdict::no,
                   "j", ""});
  const auto t = audit_report(ten).by_judge.at("j").at(AuditAttribute::geometry);
  EXPECT_EQ(t.yes + t.no, 8u);
  EXPECT_DOUBLE_EQ(t.accuracy(), 0.5);

  EXPECT_THROW(audit_report({}), InvalidArgument);
  EXPECT_THROW(audit_report({{"i", AuditAttribute::color, "w", Verdict::abstain, "j", ""}}), InvalidArgument);
}

TEST(Report, OrderInvariant) {
  std::mt19937_64 gen(1);
  std::vector<AuditVerdict> vs;
  for (int i = 0; i < 200; ++i)
    vs.push_back({"i", kAuditAttributes[gen() % 3], "v", static_cast<Verdict>(gen() % 3), gen() % 2 ? "a" : "b", ""});
  const auto a = to_json(audit_report(vs)).dump();
  std::shuffle(vs.begin(), vs.end(), gen);
  EXPECT_EQ(to_json(audit_report(vs)).dump(), a);
}

TEST_F(AuditFixture, SampleIsSeededAndImageComplete) {
  const auto& rows = *rows_;
  ASSERT_GE(rows.size(), 20u);
  const auto a = sample_audit_set(rows, 5, 42);
  const auto b = sample_audit_set(rows, 5, 42);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].row, b[i].row);
  std::set<std::size_t> images;
  for (const auto& s : a) images.insert(s.row);
  EXPECT_EQ(images.size(), 5u);
  std::size_t expected = 0;
  for (std::size_t r : images)
    for (const auto& ann : rows[r].rec.annotations) expected += ann ? 1 : 0;
  EXPECT_EQ(a.size(), expected);

  std::size_t all = 0;
  for (const auto& r : rows)
    for (const auto& ann : r.rec.annotations) all += ann ? 1 : 0;
  EXPECT_EQ(sample_audit_set(rows, rows.size(), 1).size(), all);
  EXPECT_THROW(sample_audit_set(rows, rows.size() + 1, 1), InvalidArgument);
  EXPECT_THROW(sample_audit_set({}, 1, 1), InvalidArgument);
}

TEST_F(AuditFixture, MockJudgeAgreesWithMockAnnotator) {
  const auto& rows = *rows_;
  const auto sample = sample_audit_set(rows, rows.size(), 7);
  MockVlmClient mock;
  FixedJudge always_yes("Yes");
  AuditOptions opt;
  opt.retry = no_sleep();
  const auto verdicts = run_audit(rows, sample, {{"mock", &mock}, {"yes", &always_yes}}, opt);
  const auto rep = audit_report(verdicts);
  EXPECT_EQ(rep.images, rows.size());
  EXPECT_EQ(rep.instances, sample.size());
  for (auto a : kAuditAttributes) {
    EXPECT_DOUBLE_EQ(rep.by_judge.at("mock").at(a).accuracy(), 1.0) << to_string(a);
    EXPECT_DOUBLE_EQ(rep.by_judge.at("yes").at(a).accuracy(), 1.0);
  }
  // Crops matter: a colour claim the crop does not support is rejected.
  const auto& row = rows[sample[0].row];
  const auto crop = read_file_bytes(row.dir / row.rec.prep.instances[sample[0].k].self_crop);
  const auto& color = *row.rec.annotations[sample[0].k]->attributes.color;
  const std::string wrong = color == "red" ? "blue" : "red";
  EXPECT_EQ(judge_attribute(mock, "mock", crop, "i", AuditAttribute::color, color).verdict, Verdict::yes);
  EXPECT_EQ(judge_attribute(mock, "mock", crop, "i", AuditAttribute::color, wrong).verdict, Verdict::no);
}

// Judge that says yes for even-numbered verdict requests on an even fixture.
class ParityJudge : public VlmClient {
 public:
  std::string chat(std::span<const Message> m) const override {
    const auto h = fnv1a(m.back().text);
    return h % 2 ? "no" : "yes";
  }
};

TEST(Report, ParityJudgeGivesHalf) {
  ParityJudge judge;
  std::vector<AuditVerdict> vs;
  // Pick values so exactly half hash even.
  int even = 0, odd = 0;
  for (int i = 0; even < 50 || odd < 50; ++i) {
    const std::string value = "v" + std::to_string(i);
    const bool is_even = fnv1a(judge_prompt(value)) % 2 == 0;
    if ((is_even && even >= 50) || (!is_even && odd >= 50)) continue;
    (is_even ? even : odd) += 1;
    vs.push_back(judge_attribute(judge, "p", {}, "i", AuditAttribute::color, value, no_sleep()));
  }
  EXPECT_DOUBLE_EQ(audit_report(vs).by_judge.at("p").at(AuditAttribute::color).accuracy(), 0.5);
}

}  // namespace
}  // namespace w2s

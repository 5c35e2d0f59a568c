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

#include "w2s/preprocess.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles.hpp"

namespace w2s {
namespace {

TEST(ClassifySize, ThresholdsFromLabelRules) {
  EXPECT_EQ(classify_size(0.0003), SizeClass::tiny);
  EXPECT_EQ(classify_size(0.05), SizeClass::big);
  EXPECT_EQ(classify_size(0.001), SizeClass::medium);
  EXPECT_EQ(classify_size(0.0005), SizeClass::small);
  EXPECT_EQ(classify_size(0.2), SizeClass::large);
  EXPECT_EQ(classify_size(1.0), SizeClass::large);
  EXPECT_EQ(to_string(classify_size(0.005)), "medium");
}

TEST(ClassifySize, RejectsOutOfRange) {
  EXPECT_THROW(classify_size(0.0), InvalidArgument);
  EXPECT_THROW(classify_size(1.5), InvalidArgument);
  EXPECT_THROW(classify_size(-0.1), InvalidArgument);
  EXPECT_THROW(classify_size(std::nan("")), InvalidArgument);
}

TEST(ClassifySize, AgreesWithLinearScanOracle) {
  const SizeThresholds t;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> log_ratio(std::log(1e-7), 0.0);
  for (int i = 0; i < 100000; ++i) {
    const double r = std::exp(log_ratio(rng));
    ASSERT_EQ(static_cast<int>(classify_size(r, t)), oracle::size_class_index(r, t.bounds)) << r;
  }
  for (double b : t.bounds) ASSERT_EQ(static_cast<int>(classify_size(b, t)), oracle::size_class_index(b, t.bounds));
}

TEST(SizeThresholds, CheckRejectsUnordered) {
  SizeThresholds t;
  t.bounds = {0.1, 0.05, 0.2, 0.3};
  EXPECT_THROW(t.check(), InvalidArgument);
}

Box centered_at(double cx, double cy) { return {cx - 1, cy - 1, cx + 1, cy + 1}; }

TEST(AbsolutePosition, Labels) {
  EXPECT_EQ(classify_absolute_position(centered_at(100, 100), 1000, 1000).label(), "Far Left-Top");
  EXPECT_EQ(classify_absolute_position(centered_at(500, 500), 1000, 1000).label(), "Center-Middle");
  EXPECT_EQ(classify_absolute_position(centered_at(200, 500), 1000, 1000).column, 1);
  EXPECT_EQ(classify_absolute_position(centered_at(950, 990), 1000, 1000).label(), "Far Right-Bottom");
  EXPECT_EQ(classify_absolute_position(Box{990, 990, 1000, 1000}, 1000, 1000).label(), "Far Right-Bottom");
}

TEST(AbsolutePosition, DegenerateBoxThrows) {
  EXPECT_THROW(classify_absolute_position(Box{5, 5, 5, 9}, 100, 100), InvalidArgument);
}

TEST(AbsolutePosition, CellCentersCoverAllLabels) {
  std::set<std::string> labels;
  for (int row = 0; row < 5; ++row)
    for (int col = 0; col < 5; ++col) {
      const double cx = (col + 0.5) * 1000 / 5.0, cy = (row + 0.5) * 800 / 5.0;
      const auto g = classify_absolute_position(centered_at(cx, cy), 1000, 800);
      EXPECT_EQ(g.column, col);
      EXPECT_EQ(g.row, row);
      labels.insert(g.label());
    }
  EXPECT_EQ(labels.size(), 25u);
  EXPECT_TRUE(labels.count("Upper Middle") == 0);
  EXPECT_TRUE(labels.count("Far Right-Lower Middle"));
}

TEST(InstanceCrop, ExactBoxWithoutPad) {
  EXPECT_EQ(instance_crop_rect({10, 10, 20, 20}, 100, 100, 0.0), (PixelRect{10, 10, 10, 10}));
  Image img(100, 100, 7);
  const Image c = crop_instance_region(img, {10, 10, 20, 20}, 0.0);
  EXPECT_EQ(c.width, 10);
  EXPECT_EQ(c.height, 10);
}

TEST(InstanceCrop, CornerBoxIsClamped) {
  EXPECT_EQ(instance_crop_rect({0, 0, 10, 10}, 100, 100, 0.1), (PixelRect{0, 0, 11, 11}));
  EXPECT_EQ(instance_crop_rect({90, 95, 100, 100}, 100, 100, 0.1), (PixelRect{89, 94, 11, 6}));
}

TEST(InstanceCrop, ZeroWidthBoxThrows) {
  EXPECT_THROW(instance_crop_rect({10, 10, 10, 20}, 100, 100), InvalidArgument);
}

TEST(InstanceCrop, RandomBoxesStayInBounds) {
  std::mt19937 rng(3);
  for (int i = 0; i < 20000; ++i) {
    const int w = 1 + static_cast<int>(rng() % 2000), h = 1 + static_cast<int>(rng() % 2000);
    std::uniform_real_distribution<double> ux(0, w), uy(0, h);
    double a = ux(rng), b = ux(rng), c = uy(rng), d = uy(rng);
    if (a == b || c == d) continue;
    const Box box{std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d)};
    const PixelRect r = instance_crop_rect(box, w, h, std::uniform_real_distribution<double>(0, 2)(rng));
    ASSERT_GE(r.x, 0);
    ASSERT_GE(r.y, 0);
    ASSERT_GT(r.w, 0);
    ASSERT_GT(r.h, 0);
    ASSERT_LE(r.x + r.w, w);
    ASSERT_LE(r.y + r.h, h);
  }
}

std::vector<Instance> instances(const std::vector<Box>& boxes) {
  std::vector<Instance> out;
  for (std::size_t i = 0; i < boxes.size(); ++i) out.push_back({"i" + std::to_string(i), boxes[i], "car", 0.01});
  return out;
}

TEST(ForegroundRegions, SingleBoxExpandsAboutCenter) {
  const auto in = instances({{100, 100, 120, 120}});
  const auto regions = extract_foreground_regions(in, 1024, 1024, [](double) { return 4.0; });
  ASSERT_EQ(regions.size(), 1u);
  EXPECT_EQ(regions[0].box, (Box{70, 70, 150, 150}));
  EXPECT_EQ(regions[0].member_instances, std::vector<std::string>{"i0"});
}

// 20x20 box centered at (110,110) scaled by 4 per axis covers 80x80; the
// hand-computed extent is [70,150]. Scale 6 gives 120x120 -> [50,170].
TEST(ForegroundRegions, ScaleFactorIsLinearPerAxis) {
  const auto in = instances({{100, 100, 120, 120}});
  const auto regions = extract_foreground_regions(in, 1024, 1024, [](double) { return 6.0; });
  EXPECT_EQ(regions[0].box, (Box{50, 50, 170, 170}));
}

TEST(ForegroundRegions, OverlappingExpansionsMerge) {
  const auto in = instances({{100, 100, 120, 120}, {130, 100, 150, 120}});
  const auto regions = extract_foreground_regions(in, 1024, 1024, [](double) { return 2.0; });
  ASSERT_EQ(regions.size(), 1u);
  EXPECT_EQ(regions[0].box, (Box{90, 90, 160, 130}));
  EXPECT_EQ(regions[0].member_instances, (std::vector<std::string>{"i0", "i1"}));
}

TEST(ForegroundRegions, DistantBoxesStaySeparate) {
  const auto in = instances({{100, 100, 120, 120}, {600, 600, 620, 620}});
  EXPECT_EQ(extract_foreground_regions(in, 1024, 1024, [](double) { return 2.0; }).size(), 2u);
}

TEST(ForegroundRegions, TouchingEdgesDoNotMerge) {
  const auto in = instances({{0, 0, 10, 10}, {10, 0, 20, 10}});
  EXPECT_EQ(extract_foreground_regions(in, 100, 100, [](double) { return 1.0; }).size(), 2u);
}

TEST(ForegroundRegions, EmptyInput) {
  EXPECT_TRUE(extract_foreground_regions(std::vector<Instance>{}, 100, 100).empty());
}

TEST(ForegroundRegions, ExpansionClampedToImage) {
  const auto in = instances({{0, 0, 10, 10}});
  EXPECT_EQ(extract_foreground_regions(in, 100, 100, [](double) { return 4.0; })[0].box, (Box{0, 0, 25, 25}));
}

// A greedy single pass can leave a later hull overlapping an earlier region:
// A=(0,0,10,10) alone; B and C merge to a hull reaching into A.
TEST(ForegroundRegions, SecondaryMergeOfRegionHulls) {
  const auto in = instances({{0, 0, 10, 10}, {5, 12, 20, 20}, {12, 5, 20, 20}});
  const auto regions = extract_foreground_regions(in, 100, 100, [](double) { return 1.0; });
  ASSERT_EQ(regions.size(), 1u);
  EXPECT_EQ(regions[0].box, (Box{0, 0, 20, 20}));
}

TEST(ForegroundRegions, DefaultScaleIsPiecewiseOnSize) {
  EXPECT_DOUBLE_EQ(default_scale_factor(0.0001), 4.0);
  EXPECT_DOUBLE_EQ(default_scale_factor(0.0007), 3.0);
  EXPECT_DOUBLE_EQ(default_scale_factor(0.005), 2.0);
  EXPECT_DOUBLE_EQ(default_scale_factor(0.1), 1.5);
  EXPECT_DOUBLE_EQ(default_scale_factor(0.5), 1.2);
}

TEST(ForegroundRegions, MatchesFixedPointOracle) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const double W = 256, H = 192;
    const int n = 1 + static_cast<int>(rng() % 8);
    std::vector<Box> boxes;
    for (int i = 0; i < n; ++i) {
      std::uniform_real_distribution<double> ux(0, W - 2), uy(0, H - 2);
      const double x = ux(rng), y = uy(rng);
      boxes.push_back({x, y, std::min(W, x + 1 + rng() % 40), std::min(H, y + 1 + rng() % 40)});
    }
    const auto in = instances(boxes);
    const auto regions = extract_foreground_regions(in, W, H);
    const auto expanded = expanded_boxes(in, W, H, default_scale_factor);
    std::vector<oracle::Rect> rects;
    for (const auto& e : expanded) rects.push_back({e.x1, e.y1, e.x2, e.y2});
    const auto expected = oracle::fixed_point_merge(rects);
    ASSERT_EQ(regions.size(), expected.size());
    for (std::size_t k = 0; k < regions.size(); ++k) {
      EXPECT_EQ(regions[k].box, (Box{expected[k].first.x1, expected[k].first.y1, expected[k].first.x2,
                                     expected[k].first.y2}));
      std::vector<std::string> ids;
      for (auto m : expected[k].second) ids.push_back("i" + std::to_string(m));
      EXPECT_EQ(regions[k].member_instances, ids);
      EXPECT_TRUE(regions[k].box.within(W, H));
      for (std::size_t o = k + 1; o < regions.size(); ++o) EXPECT_FALSE(overlaps(regions[k].box, regions[o].box));
    }
  }
}

Image gradient(int w, int h) {
  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto* p = img.pixel(x, y);
      p[0] = static_cast<std::uint8_t>(x * 3);
      p[1] = static_cast<std::uint8_t>(y * 5);
      p[2] = 200;
    }
  return img;
}

bool is_red(const std::uint8_t* p) { return p[0] == 255 && p[1] == 0 && p[2] == 0; }

TEST(Highlight, StrokeIsRedAndOnlyStrokeChanges) {
  const Image src = gradient(60, 50);
  const Box target{20, 15, 40, 35};
  const Image out = render_highlight(src, target);
  const int sw = highlight_stroke(60, 50);
  EXPECT_EQ(sw, 2);
  // Stroke ring just outside the target.
  for (int x = 18; x < 42; ++x) {
    EXPECT_TRUE(is_red(out.pixel(x, 13)));
    EXPECT_TRUE(is_red(out.pixel(x, 36)));
  }
  for (int y = 13; y < 37; ++y) {
    EXPECT_TRUE(is_red(out.pixel(18, y)));
    EXPECT_TRUE(is_red(out.pixel(41, y)));
  }
  std::size_t changed = 0;
  for (int y = 0; y < 50; ++y)
    for (int x = 0; x < 60; ++x) {
      const bool inside_target = x >= 20 && x < 40 && y >= 15 && y < 35;
      const bool far_outside = x < 18 || x >= 42 || y < 13 || y >= 37;
      if (inside_target || far_outside) {
        ASSERT_TRUE(std::equal(out.pixel(x, y), out.pixel(x, y) + 3, src.pixel(x, y)));
      }
      if (!std::equal(out.pixel(x, y), out.pixel(x, y) + 3, src.pixel(x, y))) {
        ++changed;
        ASSERT_TRUE(is_red(out.pixel(x, y)));
      }
    }
  EXPECT_EQ(changed, static_cast<std::size_t>(24 * 24 - 20 * 20));
}

TEST(Highlight, FlushTargetStrokeIsInsetAndVisible) {
  const Image src = gradient(40, 40);
  const Image out = render_highlight(src, Box{0, 0, 40, 40});
  for (int i = 0; i < 40; ++i) {
    EXPECT_TRUE(is_red(out.pixel(i, 0)));
    EXPECT_TRUE(is_red(out.pixel(i, 39)));
    EXPECT_TRUE(is_red(out.pixel(0, i)));
    EXPECT_TRUE(is_red(out.pixel(39, i)));
  }
  EXPECT_TRUE(std::equal(out.pixel(20, 20), out.pixel(20, 20) + 3, src.pixel(20, 20)));
}

TEST(Highlight, StrokeScalesWithCrop) {
  EXPECT_EQ(highlight_stroke(1000, 600), 6);
  EXPECT_EQ(highlight_stroke(100, 100), 2);
  EXPECT_EQ(highlight_stroke(1, 1), 1);
  const Image tiny = render_highlight(Image(1, 1, 9), Box{0, 0, 1, 1});
  EXPECT_TRUE(is_red(tiny.pixel(0, 0)));
}

TEST(ImageCodec, PngRoundTrip) {
  const Image src = gradient(33, 17);
  EXPECT_EQ(decode_image(encode_png(src)), src);
  EXPECT_THROW(decode_image(Bytes{1, 2, 3}), Error);
}

TEST(ImageCodec, Base64) {
  const std::string s = "Man";
  EXPECT_EQ(base64_encode(Bytes(s.begin(), s.end())), "TWFu");
  const std::string s2 = "Ma";
  EXPECT_EQ(base64_encode(Bytes(s2.begin(), s2.end())), "TWE=");
  const std::string s1 = "M";
  EXPECT_EQ(base64_encode(Bytes(s1.begin(), s1.end())), "TQ==");
  EXPECT_EQ(base64_encode(Bytes{}), "");
}

}  // namespace
}  // namespace w2s

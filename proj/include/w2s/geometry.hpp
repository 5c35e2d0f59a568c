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
#include <string>

#include <nlohmann/json.hpp>

#include "w2s/error.hpp"

namespace w2s {

/// Axis-aligned box in pixel coordinates, (x1,y1) top-left, (x2,y2) bottom-right.
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }

  /// Finite with x1 < x2 and y1 < y2.
  bool valid() const {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
           std::isfinite(y2) && x1 < x2 && y1 < y2;
  }

  bool within(double w, double h) const {
    return x1 >= 0 && y1 >= 0 && x2 <= w && y2 <= h;
  }

  bool contains(const Box& o) const {
    return o.x1 >= x1 && o.y1 >= y1 && o.x2 <= x2 && o.y2 <= y2;
  }

  friend bool operator==(const Box&, const Box&) = default;
};

inline double intersection_area(const Box& a, const Box& b) {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  return (w > 0 && h > 0) ? w * h : 0.0;
}

/// Positive-area overlap. Boxes sharing only an edge or corner do not overlap.
inline bool overlaps(const Box& a, const Box& b) {
  return std::min(a.x2, b.x2) > std::max(a.x1, b.x1) &&
         std::min(a.y2, b.y2) > std::max(a.y1, b.y1);
}

inline Box hull(const Box& a, const Box& b) {
  return {std::min(a.x1, b.x1), std::min(a.y1, b.y1), std::max(a.x2, b.x2),
          std::max(a.y2, b.y2)};
}

inline Box clip(const Box& b, double w, double h) {
  return {std::clamp(b.x1, 0.0, w), std::clamp(b.y1, 0.0, h), std::clamp(b.x2, 0.0, w),
          std::clamp(b.y2, 0.0, h)};
}

inline Box translate(const Box& b, double dx, double dy) {
  return {b.x1 + dx, b.y1 + dy, b.x2 + dx, b.y2 + dy};
}

/// Scale width and height by `factor` about the box center.
inline Box expand_about_center(const Box& b, double factor) {
  const double hw = 0.5 * b.width() * factor;
  const double hh = 0.5 * b.height() * factor;
  return {b.center_x() - hw, b.center_y() - hh, b.center_x() + hw, b.center_y() + hh};
}

/// Intersection over union. Throws on degenerate input.
inline double iou(const Box& a, const Box& b) {
  if (!a.valid() || !b.valid()) throw InvalidArgument("iou: degenerate box");
  const double inter = intersection_area(a, b);
  return inter / (a.area() + b.area() - inter);
}

inline nlohmann::json to_json(const Box& b) { return nlohmann::json::array({b.x1, b.y1, b.x2, b.y2}); }

inline Box box_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw SchemaError("box must be an array of 4 numbers");
  for (const auto& v : j)
    if (!v.is_number()) throw SchemaError("box must be an array of 4 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

/// Integer pixel rectangle [x, x+w) x [y, y+h).
struct PixelRect {
  int x = 0, y = 0, w = 0, h = 0;
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Smallest pixel rectangle covering `b`, clamped to a w x h raster.
inline PixelRect covering_pixels(const Box& b, int w, int h) {
  const int x1 = std::clamp(static_cast<int>(std::floor(b.x1)), 0, w);
  const int y1 = std::clamp(static_cast<int>(std::floor(b.y1)), 0, h);
  const int x2 = std::clamp(static_cast<int>(std::ceil(b.x2)), 0, w);
  const int y2 = std::clamp(static_cast<int>(std::ceil(b.y2)), 0, h);
  return {x1, y1, x2 - x1, y2 - y1};
}

}  // namespace w2s

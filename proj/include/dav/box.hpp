// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace dav {

/// Axis-aligned box in normalized [0,1] frame coordinates.
struct Box {
  double x1 = 0, y1 = 0, x2 = 1, y2 = 1;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }
  bool degenerate() const { return !(x1 < x2 && y1 < y2); }
  bool normalized() const { return x1 >= 0 && y1 >= 0 && x2 <= 1 && y2 <= 1; }
  bool contains(double x, double y) const { return x >= x1 && x <= x2 && y >= y1 && y <= y2; }

  std::array<double, 4> array() const { return {x1, y1, x2, y2}; }
  bool operator==(const Box&) const = default;
};

inline Box intersect(const Box& a, const Box& b) {
  return {std::max(a.x1, b.x1), std::max(a.y1, b.y1), std::min(a.x2, b.x2), std::min(a.y2, b.y2)};
}

inline double iou(const Box& a, const Box& b) {
  const double inter = intersect(a, b).area();
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

inline std::string to_string(const Box& b) {
  return "[" + std::to_string(b.x1) + "," + std::to_string(b.y1) + "," + std::to_string(b.x2) + "," +
         std::to_string(b.y2) + "]";
}

}  // namespace dav

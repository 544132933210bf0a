// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dav {

/// Camera control triplet. cx, cy: total pan of the frame center from first to
/// last frame as a fraction of frame width/height (positive = right/down).
/// cz: scale of the last frame relative to the first (> 1 zooms in).
struct CameraParams {
  double cx = 0.0;
  double cy = 0.0;
  double cz = 1.0;

  static constexpr double kPanMin = -1.0, kPanMax = 1.0;
  static constexpr double kZoomMin = 0.5, kZoomMax = 2.0;

  static CameraParams static_camera() { return {0.0, 0.0, 1.0}; }

  bool in_range() const {
    return cx >= kPanMin && cx <= kPanMax && cy >= kPanMin && cy <= kPanMax && cz >= kZoomMin && cz <= kZoomMax;
  }

  /// Empty when valid, otherwise a description of the first violated range.
  std::string range_error() const {
    if (!(cx >= kPanMin && cx <= kPanMax)) return "cx=" + std::to_string(cx) + " outside the pan range [-1, 1]";
    if (!(cy >= kPanMin && cy <= kPanMax)) return "cy=" + std::to_string(cy) + " outside the pan range [-1, 1]";
    if (!(cz >= kZoomMin && cz <= kZoomMax)) return "cz=" + std::to_string(cz) + " outside the zoom range [0.5, 2]";
    return {};
  }

  void validate() const {
    if (auto e = range_error(); !e.empty()) throw std::invalid_argument("camera parameters: " + e);
  }

  bool operator==(const CameraParams&) const = default;
};

/// Parses comma-separated decimal literals, e.g. "0.5,-1,2".
inline std::vector<double> parse_number_list(std::string_view text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto next = text.find(',', pos);
    if (next == std::string_view::npos) next = text.size();
    auto item = text.substr(pos, next - pos);
    while (!item.empty() && (item.front() == ' ' || item.front() == '\t')) item.remove_prefix(1);
    while (!item.empty() && (item.back() == ' ' || item.back() == '\t')) item.remove_suffix(1);
    double v = 0;
    auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc{} || end != item.data() + item.size()) {
      throw std::invalid_argument("'" + std::string(item) + "' is not a decimal number");
    }
    out.push_back(v);
    pos = next + 1;
  }
  return out;
}

/// Parses "cx,cy,cz" and checks the ranges.
inline CameraParams parse_camera(std::string_view text) {
  const auto v = parse_number_list(text);
  if (v.size() != 3) throw std::invalid_argument("camera expects three values cx,cy,cz, got '" + std::string(text) + "'");
  CameraParams p{v[0], v[1], v[2]};
  p.validate();
  return p;
}

}  // namespace dav

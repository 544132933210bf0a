// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dav/box.hpp"
#include "dav/camgen/video_clip.hpp"

namespace dav {

struct ColorTarget {
  std::string key;
  std::array<float, 3> rgb;
};

/// Per frame, per color key: the detected box, if any.
struct DetectionSet {
  std::vector<std::string> keys;
  std::vector<std::vector<std::optional<Box>>> boxes;  // [frame][key]
};

/// Per frame, per key: the commanded box.
struct GroundingTargets {
  std::vector<std::string> keys;
  std::vector<std::vector<Box>> boxes;  // [frame][key]
};

struct DetectorOptions {
  double color_radius = 0.4;  // admits every palette color pushed to its saturated corner by guidance
  std::size_t min_pixels = 3;
};

/// Thresholds pixels within a color ball around each key, keeps the largest
/// 4-connected component and returns its tight normalized box.
inline DetectionSet detect_boxes(const VideoClip& clip, const std::vector<ColorTarget>& targets,
                                 const DetectorOptions& opt = {}) {
  if (clip.channels() != 3) throw std::invalid_argument("detect_boxes expects RGB clips");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    for (std::size_t j = i + 1; j < targets.size(); ++j) {
      if (targets[i].rgb == targets[j].rgb) throw std::invalid_argument("detect_boxes: duplicate color keys");
    }
  }
  const std::size_t H = clip.height(), W = clip.width();
  DetectionSet out;
  for (const auto& t : targets) out.keys.push_back(t.key);
  out.boxes.assign(clip.frames(), std::vector<std::optional<Box>>(targets.size()));
  std::vector<std::uint8_t> mask(H * W);
  std::vector<int> label(H * W);
  std::vector<std::size_t> stack;
  const double r2 = opt.color_radius * opt.color_radius;
  for (std::size_t f = 0; f < clip.frames(); ++f) {
    for (std::size_t t = 0; t < targets.size(); ++t) {
      for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
          double d2 = 0;
          for (std::size_t c = 0; c < 3; ++c) {
            const double d = clip.at(f, c, y, x) - targets[t].rgb[c];
            d2 += d * d;
          }
          mask[y * W + x] = d2 <= r2;
        }
      }
      std::fill(label.begin(), label.end(), -1);
      std::size_t best_count = 0;
      Box best_box;
      int next = 0;
      for (std::size_t s = 0; s < H * W; ++s) {
        if (!mask[s] || label[s] >= 0) continue;
        std::size_t count = 0, x0 = W, y0 = H, x1 = 0, y1 = 0;
        stack.assign(1, s);
        label[s] = next;
        while (!stack.empty()) {
          const std::size_t p = stack.back();
          stack.pop_back();
          const std::size_t py = p / W, px = p % W;
          ++count;
          x0 = std::min(x0, px);
          x1 = std::max(x1, px);
          y0 = std::min(y0, py);
          y1 = std::max(y1, py);
          auto visit = [&](std::size_t q) {
            if (mask[q] && label[q] < 0) {
              label[q] = next;
              stack.push_back(q);
            }
          };
          if (px > 0) visit(p - 1);
          if (px + 1 < W) visit(p + 1);
          if (py > 0) visit(p - W);
          if (py + 1 < H) visit(p + W);
        }
        ++next;
        if (count > best_count) {
          best_count = count;
          best_box = {static_cast<double>(x0) / W, static_cast<double>(y0) / H, static_cast<double>(x1 + 1) / W,
                      static_cast<double>(y1 + 1) / H};
        }
      }
      if (best_count >= opt.min_pixels) out.boxes[f][t] = best_box;
    }
  }
  return out;
}

struct GroundingScore {
  double miou = 0;  // in [0,1]
  double ap50 = 0;  // percentage
};

/// Mean IoU over all (frame, key) pairs with misses counted as 0, and the
/// percentage of pairs with IoU >= 0.5.
inline GroundingScore miou_ap50(const DetectionSet& det, const GroundingTargets& targets) {
  if (det.keys != targets.keys) throw std::invalid_argument("miou_ap50: detection and target keys differ");
  if (det.boxes.size() != targets.boxes.size()) {
    throw std::invalid_argument("miou_ap50: frame counts differ (" + std::to_string(det.boxes.size()) + " vs " +
                                std::to_string(targets.boxes.size()) + ")");
  }
  double sum = 0;
  std::size_t hits = 0, n = 0;
  for (std::size_t f = 0; f < det.boxes.size(); ++f) {
    for (std::size_t k = 0; k < det.keys.size(); ++k) {
      const double v = det.boxes[f][k] ? iou(*det.boxes[f][k], targets.boxes[f][k]) : 0.0;
      sum += v;
      hits += v >= 0.5;
      ++n;
    }
  }
  if (n == 0) return {};
  return {sum / static_cast<double>(n), 100.0 * static_cast<double>(hits) / static_cast<double>(n)};
}

}  // namespace dav

// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dav/box.hpp"
#include "dav/camgen/camera_params.hpp"
#include "dav/camgen/video_clip.hpp"

namespace dav {

/// Per-frame crop windows, normalized to the source frame.
struct CropBoxSequence {
  std::vector<Box> boxes;

  std::size_t frames() const { return boxes.size(); }
};

inline double linspace_at(double a, double b, std::size_t i, std::size_t n) {
  if (i + 1 == n) return b;
  return a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
}

/// Un-normalized camera boxes: the first frame is [0,0,1,1]; the last is the
/// unit window shifted by (cx, cy) and scaled by 1/cz about its center. Corners
/// are linearly interpolated in between.
inline CropBoxSequence raw_camera_boxes(const CameraParams& p, std::size_t frames) {
  if (frames < 2) throw std::invalid_argument("camera boxes need at least 2 frames, got " + std::to_string(frames));
  p.validate();
  const double half = 0.5 / p.cz;
  CropBoxSequence seq;
  seq.boxes.reserve(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    seq.boxes.push_back({linspace_at(0, p.cx + 0.5 - half, i, frames), linspace_at(0, p.cy + 0.5 - half, i, frames),
                         linspace_at(1, p.cx + 0.5 + half, i, frames), linspace_at(1, p.cy + 0.5 + half, i, frames)});
  }
  return seq;
}

/// Rescales all corners by the global min/max per axis so they span [0,1].
inline CropBoxSequence normalize_crop_boxes(const CropBoxSequence& raw) {
  double min_x = raw.boxes.front().x1, max_x = raw.boxes.front().x2;
  double min_y = raw.boxes.front().y1, max_y = raw.boxes.front().y2;
  for (const auto& b : raw.boxes) {
    min_x = std::min({min_x, b.x1, b.x2});
    max_x = std::max({max_x, b.x1, b.x2});
    min_y = std::min({min_y, b.y1, b.y2});
    max_y = std::max({max_y, b.y1, b.y2});
  }
  const double sx = max_x - min_x, sy = max_y - min_y;
  CropBoxSequence out;
  out.boxes.reserve(raw.boxes.size());
  for (const auto& b : raw.boxes) {
    out.boxes.push_back({(b.x1 - min_x) / sx, (b.y1 - min_y) / sy, (b.x2 - min_x) / sx, (b.y2 - min_y) / sy});
  }
  return out;
}

inline CropBoxSequence compute_crop_boxes(const CameraParams& p, std::size_t frames) {
  return normalize_crop_boxes(raw_camera_boxes(p, frames));
}

/// Bilinear sample with half-pixel-centered coordinates (pixel i spans
/// [i, i+1) and is sampled at i); indices are clamped to the plane.
inline float bilinear_sample(std::span<const float> plane, std::size_t height, std::size_t width, double xs,
                             double ys) {
  const double fx0 = std::floor(xs), fy0 = std::floor(ys);
  const float ax = static_cast<float>(xs - fx0), ay = static_cast<float>(ys - fy0);
  auto clampi = [](double v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(n - 1)));
  };
  const std::size_t x0 = clampi(fx0, width), x1 = clampi(fx0 + 1, width);
  const std::size_t y0 = clampi(fy0, height), y1 = clampi(fy0 + 1, height);
  const float top = (1.f - ax) * plane[y0 * width + x0] + ax * plane[y0 * width + x1];
  const float bot = (1.f - ax) * plane[y1 * width + x0] + ax * plane[y1 * width + x1];
  return (1.f - ay) * top + ay * bot;
}

/// Resamples the normalized window `box` of one source plane to h x w.
inline void crop_resize_plane(std::span<const float> src, std::size_t src_h, std::size_t src_w, const Box& box,
                              std::span<float> dst, std::size_t h, std::size_t w) {
  const double x0 = box.x1 * static_cast<double>(src_w), y0 = box.y1 * static_cast<double>(src_h);
  const double step_x = box.width() * static_cast<double>(src_w) / static_cast<double>(w);
  const double step_y = box.height() * static_cast<double>(src_h) / static_cast<double>(h);
  for (std::size_t v = 0; v < h; ++v) {
    const double ys = y0 + (static_cast<double>(v) + 0.5) * step_y - 0.5;
    for (std::size_t u = 0; u < w; ++u) {
      const double xs = x0 + (static_cast<double>(u) + 0.5) * step_x - 0.5;
      dst[v * w + u] = bilinear_sample(src, src_h, src_w, xs, ys);
    }
  }
}

inline VideoClip resize_clip(const VideoClip& src, std::size_t h, std::size_t w) {
  VideoClip out(src.frames(), src.channels(), h, w);
  for (std::size_t f = 0; f < src.frames(); ++f) {
    for (std::size_t c = 0; c < src.channels(); ++c) {
      crop_resize_plane(src.plane(f, c), src.height(), src.width(), Box{}, out.plane(f, c), h, w);
    }
  }
  return out;
}

/// Simulates camera pan/zoom on a stationary-camera clip by resampling a moving
/// crop window per frame. Crop corners stay fractional (no integer rounding).
inline VideoClip aug_with_cam_motion(const VideoClip& src, const CameraParams& params, std::size_t h, std::size_t w) {
  if (src.frames() < 2) throw std::invalid_argument("camera augmentation needs at least 2 frames");
  const auto crops = compute_crop_boxes(params, src.frames());
  VideoClip out(src.frames(), src.channels(), h, w);
  for (std::size_t f = 0; f < src.frames(); ++f) {
    const auto& b = crops.boxes[f];
    if (b.width() * static_cast<double>(src.width()) < 2.0 || b.height() * static_cast<double>(src.height()) < 2.0) {
      throw std::invalid_argument("camera augmentation: crop window of frame " + std::to_string(f) + " " +
                                  to_string(b) + " spans fewer than 2x2 source pixels");
    }
    for (std::size_t c = 0; c < src.channels(); ++c) {
      crop_resize_plane(src.plane(f, c), src.height(), src.width(), b, out.plane(f, c), h, w);
    }
  }
  return out;
}

}  // namespace dav

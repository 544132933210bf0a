// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "dav/box.hpp"
#include "dav/camgen/video_clip.hpp"
#include "dav/camgen/vocab.hpp"

namespace dav {

struct SyntheticObject {
  ShapeKind shape = ShapeKind::kSquare;
  std::size_t color = 0;  // index into kColors
  double start_x = 0.5, start_y = 0.5;  // normalized center at the first frame
  double end_x = 0.5, end_y = 0.5;      // normalized center at the last frame
  double size = 0.3;                    // side length as a fraction of the frame
};

struct SyntheticClipSpec {
  std::uint64_t background_seed = 0;
  std::vector<SyntheticObject> objects;
  std::size_t frames = 8;
  std::size_t height = 64;
  std::size_t width = 64;

  void validate() const {
    if (frames < 2 || height < 4 || width < 4) throw std::invalid_argument("synthetic clip dims too small");
    std::set<std::size_t> colors;
    for (std::size_t i = 0; i < objects.size(); ++i) {
      const auto& o = objects[i];
      if (o.color >= kColors.size()) throw std::invalid_argument("object " + std::to_string(i) + ": unknown color");
      if (!colors.insert(o.color).second) {
        throw std::invalid_argument("objects share the color '" + std::string(kColors[o.color].name) + "'");
      }
      const double r = o.size / 2;
      if (!(o.size > 0) || std::min({o.start_x, o.start_y, o.end_x, o.end_y}) - r < 0 ||
          std::max({o.start_x, o.start_y, o.end_x, o.end_y}) + r > 1) {
        throw std::invalid_argument("object " + std::to_string(i) + ": path leaves the frame");
      }
    }
  }
};

struct SyntheticClip {
  VideoClip clip;
  Caption caption;
  std::vector<std::vector<Box>> boxes;  // [object][frame], tight around the rendered shape
};

/// Static grayscale background: mid-gray plus signed Gaussian blobs.
inline std::vector<float> render_background(std::uint64_t seed, std::size_t h, std::size_t w) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0.0, 1.0), radius(0.05, 0.13), amp(0.18, 0.32);
  std::bernoulli_distribution sign(0.5);
  struct Blob {
    double x, y, r, a;
  };
  std::vector<Blob> blobs(14);
  for (auto& b : blobs) b = {pos(rng), pos(rng), radius(rng), sign(rng) ? amp(rng) : -amp(rng)};
  std::vector<float> out(h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double px = (x + 0.5) / static_cast<double>(w), py = (y + 0.5) / static_cast<double>(h);
      double v = 0.5;
      for (const auto& b : blobs) {
        const double d2 = (px - b.x) * (px - b.x) + (py - b.y) * (py - b.y);
        v += b.a * std::exp(-d2 / (2 * b.r * b.r));
      }
      out[y * w + x] = static_cast<float>(std::clamp(v, 0.12, 0.88));
    }
  }
  return out;
}

inline bool shape_covers(ShapeKind shape, double dx, double dy, double size) {
  const double r = size / 2;
  switch (shape) {
    case ShapeKind::kSquare:
      return std::abs(dx) <= r && std::abs(dy) <= r;
    case ShapeKind::kCircle:
      return dx * dx + dy * dy <= r * r;
    case ShapeKind::kTriangle: {
      // Apex up, base at the bottom edge of the bounding square.
      if (dy < -r || dy > r) return false;
      return std::abs(dx) <= 0.5 * (dy + r);
    }
  }
  return false;
}

inline Caption caption_for(const std::vector<SyntheticObject>& objects) {
  Caption c{Vocabulary::kSos};
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (i) c.push_back(Vocabulary::kAnd);
    c.push_back(Vocabulary::color_token(objects[i].color));
    c.push_back(Vocabulary::shape_token(objects[i].shape));
  }
  c.push_back(Vocabulary::kBackground);
  c.push_back(Vocabulary::kEos);
  return c;
}

/// Renders a stationary-camera clip: a static background with shapes moving
/// linearly from their start to end centers.
inline SyntheticClip gen_synthetic_clip(const SyntheticClipSpec& spec) {
  spec.validate();
  const std::size_t F = spec.frames, H = spec.height, W = spec.width;
  SyntheticClip out{VideoClip(F, 3, H, W), caption_for(spec.objects), {}};
  const auto bg = render_background(spec.background_seed, H, W);
  for (std::size_t f = 0; f < F; ++f) {
    for (std::size_t c = 0; c < 3; ++c) std::copy(bg.begin(), bg.end(), out.clip.plane(f, c).begin());
  }
  out.boxes.assign(spec.objects.size(), std::vector<Box>(F));
  for (std::size_t n = 0; n < spec.objects.size(); ++n) {
    const auto& o = spec.objects[n];
    const auto& rgb = kColors[o.color].rgb;
    for (std::size_t f = 0; f < F; ++f) {
      const double t = static_cast<double>(f) / static_cast<double>(F - 1);
      const double cx = o.start_x + t * (o.end_x - o.start_x), cy = o.start_y + t * (o.end_y - o.start_y);
      std::size_t min_x = W, min_y = H, max_x = 0, max_y = 0;
      for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
          const double dx = (x + 0.5) / static_cast<double>(W) - cx, dy = (y + 0.5) / static_cast<double>(H) - cy;
          if (!shape_covers(o.shape, dx, dy, o.size)) continue;
          for (std::size_t c = 0; c < 3; ++c) out.clip.at(f, c, y, x) = rgb[c];
          min_x = std::min(min_x, x);
          max_x = std::max(max_x, x);
          min_y = std::min(min_y, y);
          max_y = std::max(max_y, y);
        }
      }
      if (min_x > max_x) throw std::invalid_argument("object " + std::to_string(n) + " renders no pixels");
      out.boxes[n][f] = {static_cast<double>(min_x) / W, static_cast<double>(min_y) / H,
                         static_cast<double>(max_x + 1) / W, static_cast<double>(max_y + 1) / H};
    }
  }
  return out;
}

struct SyntheticSampling {
  std::size_t frames = 8;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t max_objects = 2;
  double min_size = 0.28, max_size = 0.4;
};

/// Draws a random valid spec: 1..max_objects shapes with distinct colors on
/// linear paths inside the frame.
template <typename Rng>
SyntheticClipSpec random_clip_spec(Rng& rng, const SyntheticSampling& opt = {}) {
  SyntheticClipSpec spec;
  spec.frames = opt.frames;
  spec.height = opt.height;
  spec.width = opt.width;
  spec.background_seed = rng();
  std::uniform_int_distribution<std::size_t> count(1, std::max<std::size_t>(1, opt.max_objects));
  std::vector<std::size_t> colors(kColors.size());
  std::iota(colors.begin(), colors.end(), std::size_t{0});
  std::shuffle(colors.begin(), colors.end(), rng);
  const std::size_t n = opt.max_objects == 0 ? 0 : count(rng);
  std::uniform_real_distribution<double> size(opt.min_size, opt.max_size), unit(0.0, 1.0);
  std::uniform_int_distribution<int> shape(0, 2);
  for (std::size_t i = 0; i < n; ++i) {
    SyntheticObject o;
    o.color = colors[i];
    o.shape = static_cast<ShapeKind>(shape(rng));
    o.size = size(rng);
    const double lo = o.size / 2, span = 1 - o.size;
    o.start_x = lo + span * unit(rng);
    o.start_y = lo + span * unit(rng);
    o.end_x = lo + span * unit(rng);
    o.end_y = lo + span * unit(rng);
    spec.objects.push_back(o);
  }
  return spec;
}

}  // namespace dav

// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "dav/box.hpp"
#include "dav/diffkit/attention.hpp"

namespace dav {

struct Point {
  double x = 0, y = 0;
  bool operator==(const Point&) const = default;
};

/// Caption positions of one object's words and its box in every frame.
struct BoxTrajectory {
  std::vector<std::size_t> tokens;
  std::vector<Box> boxes;
};

/// Per-frame boxes whose centers walk the track polyline at uniform arc
/// length while width and height interpolate linearly. An empty track means
/// the straight segment between the two box centers.
inline std::vector<Box> build_box_trajectory(const Box& start, const Box& end, std::vector<Point> track,
                                             std::size_t frames) {
  if (frames < 2) throw std::invalid_argument("box trajectory needs at least 2 frames, got " + std::to_string(frames));
  if (start.degenerate() || end.degenerate()) throw std::invalid_argument("box trajectory: degenerate start or end box");
  const Point c0{start.cx(), start.cy()}, c1{end.cx(), end.cy()};
  if (track.empty()) track = {c0, c1};
  auto near = [](Point a, Point b) { return std::abs(a.x - b.x) <= 1e-6 && std::abs(a.y - b.y) <= 1e-6; };
  if (!near(track.front(), c0) || !near(track.back(), c1)) {
    throw std::invalid_argument("box trajectory: track must start at the start-box center and end at the end-box center");
  }
  std::vector<double> cum{0.0};
  for (std::size_t i = 1; i < track.size(); ++i) {
    cum.push_back(cum.back() + std::hypot(track[i].x - track[i - 1].x, track[i].y - track[i - 1].y));
  }
  const double total = cum.back();
  if (total == 0.0 && !near(c0, c1)) {
    throw std::invalid_argument("box trajectory: zero-length track between different box centers");
  }
  std::vector<Box> out;
  out.reserve(frames);
  for (std::size_t k = 0; k < frames; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(frames - 1);
    Point c = track.front();
    if (total > 0) {
      const double s = frac * total;
      std::size_t seg = 1;
      while (seg + 1 < cum.size() && cum[seg] < s) ++seg;
      const double len = cum[seg] - cum[seg - 1];
      const double u = len > 0 ? std::clamp((s - cum[seg - 1]) / len, 0.0, 1.0) : 0.0;
      c = {track[seg - 1].x + u * (track[seg].x - track[seg - 1].x),
           track[seg - 1].y + u * (track[seg].y - track[seg - 1].y)};
    }
    if (k + 1 == frames) c = track.back();
    // Corners interpolate linearly (so size does too); the track then moves
    // the box by its offset from the straight-line center.
    auto lerp = [frac](double a, double b) { return a + frac * (b - a); };
    const double ox = c.x - lerp(c0.x, c1.x), oy = c.y - lerp(c0.y, c1.y);
    Box b{std::clamp(lerp(start.x1, end.x1) + ox, 0.0, 1.0), std::clamp(lerp(start.y1, end.y1) + oy, 0.0, 1.0),
          std::clamp(lerp(start.x2, end.x2) + ox, 0.0, 1.0), std::clamp(lerp(start.y2, end.y2) + oy, 0.0, 1.0)};
    if (b.degenerate()) throw std::invalid_argument("box trajectory leaves the frame at frame " + std::to_string(k));
    out.push_back(b);
  }
  return out;
}

/// Row-major indices of the h x w grid cells whose centers lie inside the
/// box (edges inclusive). A box that covers no center binds to the cell that
/// contains its own center.
inline std::vector<std::size_t> region_indices(const Box& box, std::size_t h, std::size_t w) {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      if (box.contains((c + 0.5) / static_cast<double>(w), (r + 0.5) / static_cast<double>(h))) {
        out.push_back(r * w + c);
      }
    }
  }
  if (out.empty()) {
    const auto r = std::min(h - 1, static_cast<std::size_t>(std::max(0.0, box.cy() * static_cast<double>(h))));
    const auto c = std::min(w - 1, static_cast<std::size_t>(std::max(0.0, box.cx() * static_cast<double>(w))));
    out.push_back(r * w + c);
  }
  return out;
}

/// Cells outside every given box region.
inline std::vector<std::size_t> background_indices(const std::vector<Box>& boxes, std::size_t h, std::size_t w) {
  std::vector<char> taken(h * w, 0);
  for (const auto& b : boxes) {
    for (auto i : region_indices(b, h, w)) taken[i] = 1;
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < h * w; ++i) {
    if (!taken[i]) out.push_back(i);
  }
  return out;
}

/// Denoiser block groups: first, middle and last thirds of the blocks.
enum class BlockGroup { kEncoder, kMiddle, kDecoder };

inline BlockGroup block_group(std::size_t block, std::size_t num_blocks) {
  const std::size_t third = 3 * block / num_blocks;
  return third == 0 ? BlockGroup::kEncoder : third == 1 ? BlockGroup::kMiddle : BlockGroup::kDecoder;
}

struct Placement {
  bool encoder = true, middle = true, decoder = true;

  bool enabled(BlockGroup g) const {
    return g == BlockGroup::kEncoder ? encoder : g == BlockGroup::kMiddle ? middle : decoder;
  }
  std::string str() const {
    std::string s;
    for (auto [on, name] : {std::pair{encoder, "E"}, {middle, "M"}, {decoder, "D"}}) {
      if (on) s += (s.empty() ? "" : ",") + std::string(name);
    }
    return s.empty() ? "none" : s;
  }
  bool operator==(const Placement&) const = default;
};

/// Parses "E,M,D" subsets (any order, "none" or empty for no group).
inline Placement parse_placement(const std::string& text) {
  Placement p{false, false, false};
  if (text.empty() || text == "none") return p;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string part = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (part == "E") {
      p.encoder = true;
    } else if (part == "M") {
      p.middle = true;
    } else if (part == "D") {
      p.decoder = true;
    } else {
      throw std::invalid_argument("placement '" + text + "': expected a subset of E,M,D");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return p;
}

/// Attention-modulation settings for one generation. Suppression applies in
/// every text cross-attention layer at every step; amplification applies at
/// t >= tau * t_max in the block groups enabled by `placement`.
struct ModulationSpec {
  double lambda = 25.0;
  double tau = 0.95;
  std::vector<BoxTrajectory> objects;
  std::optional<std::size_t> background_token;
  Placement placement;
  bool amplification = true;
  bool suppression = true;

  bool active() const { return !objects.empty() || background_token.has_value(); }

  /// Checks token bindings against a caption of `caption_len` tokens whose
  /// first and last entries are the start and end markers.
  void validate(std::size_t caption_len, std::size_t frames) const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("modulation strength must be >= 0");
    if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("modulation cut-off tau must lie in [0, 1]");
    std::set<std::size_t> bound;
    auto bind = [&](std::size_t tok) {
      if (tok == 0 || tok + 1 >= caption_len) {
        throw std::invalid_argument("modulation: token " + std::to_string(tok) +
                                    " is a start/end marker or outside the caption");
      }
      if (!bound.insert(tok).second) {
        throw std::invalid_argument("modulation: token " + std::to_string(tok) + " is bound to two regions");
      }
    };
    for (const auto& o : objects) {
      if (o.tokens.empty()) throw std::invalid_argument("modulation: object without caption tokens");
      if (o.boxes.size() != frames) {
        throw std::invalid_argument("modulation: trajectory has " + std::to_string(o.boxes.size()) +
                                    " boxes for " + std::to_string(frames) + " frames");
      }
      for (auto t : o.tokens) bind(t);
    }
    if (background_token) bind(*background_token);
  }
};

/// S for frame k at training timestep t, shaped [h*w x caption_len].
inline Tensor<double> modulation_term(const ModulationSpec& spec, std::size_t frame, double t, double t_max,
                                      std::size_t h, std::size_t w, std::size_t caption_len) {
  if (!(t >= 0 && t <= t_max)) throw std::invalid_argument("modulation_term: timestep outside the training horizon");
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  const std::size_t cells = h * w;
  Tensor<double> s({cells, caption_len});
  const bool amplify = spec.amplification && t >= spec.tau * t_max;
  auto fill_column = [&](std::size_t tok, const std::vector<std::size_t>& region) {
    std::vector<char> inside(cells, 0);
    for (auto i : region) inside[i] = 1;
    const double boost = amplify ? 1.0 - static_cast<double>(region.size()) / static_cast<double>(cells) : 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
      s.at(i, tok) = inside[i] ? boost : (spec.suppression ? neg_inf : 0.0);
    }
  };
  std::vector<Box> frame_boxes;
  for (const auto& o : spec.objects) {
    if (frame >= o.boxes.size()) throw std::invalid_argument("modulation_term: trajectory does not cover frame");
    frame_boxes.push_back(o.boxes[frame]);
    const auto region = region_indices(o.boxes[frame], h, w);
    for (auto tok : o.tokens) fill_column(tok, region);
  }
  if (spec.background_token) fill_column(*spec.background_token, background_indices(frame_boxes, h, w));
  return s;
}

/// lambda * S with suppressed entries kept at -inf for every lambda,
/// including zero.
template <typename T>
Tensor<T> scaled_modulation(const Tensor<double>& s, double lambda) {
  Tensor<T> out(s.shape());
  for (std::size_t i = 0; i < s.numel(); ++i) {
    out[i] = std::isinf(s[i]) && s[i] < 0 ? -std::numeric_limits<T>::infinity() : static_cast<T>(lambda * s[i]);
  }
  return out;
}

/// Softmax((Q K^T + lambda S) / sqrt(d)) V for one frame.
template <typename T>
Tensor<T> modulated_cross_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                                    const Tensor<double>& s, double lambda) {
  if (s.rows() != q.rows() || s.cols() != k.rows()) {
    throw std::invalid_argument("modulated attention: S shape " + shape_str(s.shape()) + " does not match [" +
                                std::to_string(q.rows()) + "x" + std::to_string(k.rows()) + "]");
  }
  return scaled_dot_attention(q, k, v, scaled_modulation<T>(s, lambda));
}

}  // namespace dav

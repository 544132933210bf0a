// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dav/camgen/augment.hpp"
#include "dav/diffkit/binary_io.hpp"

namespace dav {

/// Dense displacement per consecutive frame pair in output-pixel units,
/// stored as [pairs, 2, height, width] with channel 0 = dx, 1 = dy.
class FlowField {
 public:
  FlowField() = default;
  FlowField(std::size_t pairs, std::size_t height, std::size_t width) : data_({pairs, 2, height, width}) {}

  std::size_t pairs() const { return data_.dim(0); }
  std::size_t height() const { return data_.dim(2); }
  std::size_t width() const { return data_.dim(3); }

  float& dx(std::size_t k, std::size_t y, std::size_t x) { return data_[index(k, 0, y, x)]; }
  float& dy(std::size_t k, std::size_t y, std::size_t x) { return data_[index(k, 1, y, x)]; }
  float dx(std::size_t k, std::size_t y, std::size_t x) const { return data_[index(k, 0, y, x)]; }
  float dy(std::size_t k, std::size_t y, std::size_t x) const { return data_[index(k, 1, y, x)]; }

  const Tensor<float>& tensor() const { return data_; }
  Tensor<float>& tensor() { return data_; }
  bool same_shape(const FlowField& o) const { return data_.shape() == o.data_.shape(); }
  bool operator==(const FlowField& o) const { return data_ == o.data_; }

 private:
  std::size_t index(std::size_t k, std::size_t c, std::size_t y, std::size_t x) const {
    return ((k * 2 + c) * height() + y) * width() + x;
  }
  Tensor<float> data_;
};

/// Flow implied by the crop windows that camera augmentation samples: a pixel
/// of frame k is mapped to its source point and re-expressed in frame k+1.
inline FlowField gt_flow_from_camera(const CameraParams& params, std::size_t frames, std::size_t h, std::size_t w) {
  const auto crops = compute_crop_boxes(params, frames);
  for (std::size_t k = 0; k < frames; ++k) {
    if (crops.boxes[k].degenerate()) {
      throw std::invalid_argument("ground-truth flow: degenerate crop window at frame " + std::to_string(k));
    }
  }
  FlowField flow(frames - 1, h, w);
  for (std::size_t k = 0; k + 1 < frames; ++k) {
    const Box& a = crops.boxes[k];
    const Box& b = crops.boxes[k + 1];
    for (std::size_t y = 0; y < h; ++y) {
      const double ny = (y + 0.5) / static_cast<double>(h);
      const double sy = a.y1 + ny * a.height();
      const double ny2 = (sy - b.y1) / b.height();
      for (std::size_t x = 0; x < w; ++x) {
        const double nx = (x + 0.5) / static_cast<double>(w);
        const double sx = a.x1 + nx * a.width();
        const double nx2 = (sx - b.x1) / b.width();
        flow.dx(k, y, x) = static_cast<float>((nx2 - nx) * static_cast<double>(w));
        flow.dy(k, y, x) = static_cast<float>((ny2 - ny) * static_cast<double>(h));
      }
    }
  }
  return flow;
}

struct EstimatedFlow {
  FlowField flow;
  std::vector<std::uint8_t> low_confidence;  // [pairs, height, width]; 1 where a block was textureless

  bool low(std::size_t k, std::size_t y, std::size_t x) const {
    return low_confidence[(k * flow.height() + y) * flow.width() + x] != 0;
  }
};

namespace detail {

inline std::vector<double> luminance(const VideoClip& clip, std::size_t f) {
  std::vector<double> out(clip.plane_size(), 0.0);
  for (std::size_t c = 0; c < clip.channels(); ++c) {
    const auto p = clip.plane(f, c);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += p[i];
  }
  for (auto& v : out) v /= static_cast<double>(clip.channels());
  return out;
}

}  // namespace detail

/// Integer block matching (sum of squared differences over the block pixels
/// that stay in frame) with parabolic sub-pixel refinement. Each block's flow
/// is broadcast to its pixels.
inline EstimatedFlow estimate_flow(const VideoClip& clip, std::size_t block, std::size_t search,
                                   double texture_threshold = 1e-4) {
  if (clip.frames() < 2) throw std::invalid_argument("flow estimation needs at least 2 frames");
  const std::size_t H = clip.height(), W = clip.width();
  if (block == 0 || block > H || block > W || search >= std::max(H, W)) {
    throw std::invalid_argument("flow estimation: block " + std::to_string(block) + " / search " +
                                std::to_string(search) + " do not fit a " + std::to_string(H) + "x" +
                                std::to_string(W) + " frame");
  }
  EstimatedFlow out{FlowField(clip.frames() - 1, H, W), std::vector<std::uint8_t>((clip.frames() - 1) * H * W, 0)};
  const int R = static_cast<int>(search);
  const std::size_t side = 2 * search + 1;
  auto prev = detail::luminance(clip, 0);
  for (std::size_t k = 0; k + 1 < clip.frames(); ++k) {
    const auto next = detail::luminance(clip, k + 1);
    for (std::size_t by = 0; by < H; by += block) {
      for (std::size_t bx = 0; bx < W; bx += block) {
        const std::size_t ey = std::min(H, by + block), ex = std::min(W, bx + block);
        const std::size_t n = (ey - by) * (ex - bx);
        double mean = 0, var = 0;
        for (std::size_t y = by; y < ey; ++y) {
          for (std::size_t x = bx; x < ex; ++x) mean += prev[y * W + x];
        }
        mean /= static_cast<double>(n);
        for (std::size_t y = by; y < ey; ++y) {
          for (std::size_t x = bx; x < ex; ++x) var += (prev[y * W + x] - mean) * (prev[y * W + x] - mean);
        }
        var /= static_cast<double>(n);

        std::vector<double> cost(side * side, std::numeric_limits<double>::infinity());
        int best_dx = 0, best_dy = 0;
        double best = std::numeric_limits<double>::infinity();
        for (int dy = -R; dy <= R; ++dy) {
          for (int dx = -R; dx <= R; ++dx) {
            double ssd = 0;
            std::size_t used = 0;
            for (std::size_t y = by; y < ey; ++y) {
              const int ty = static_cast<int>(y) + dy;
              if (ty < 0 || ty >= static_cast<int>(H)) continue;
              for (std::size_t x = bx; x < ex; ++x) {
                const int tx = static_cast<int>(x) + dx;
                if (tx < 0 || tx >= static_cast<int>(W)) continue;
                const double d = next[ty * W + tx] - prev[y * W + x];
                ssd += d * d;
                ++used;
              }
            }
            if (2 * used < n) continue;
            const double c = ssd / static_cast<double>(used);
            cost[(dy + R) * side + (dx + R)] = c;
            const bool better = c < best - 1e-12 ||
                                (std::abs(c - best) <= 1e-12 && std::abs(dx) + std::abs(dy) < std::abs(best_dx) + std::abs(best_dy));
            if (better) {
              best = c;
              best_dx = dx;
              best_dy = dy;
            }
          }
        }
        auto at = [&](int dx, int dy) {
          if (dx < -R || dx > R || dy < -R || dy > R) return std::numeric_limits<double>::infinity();
          return cost[(dy + R) * side + (dx + R)];
        };
        auto refine = [](double cm, double c0, double cp) {
          if (!std::isfinite(cm) || !std::isfinite(cp) || c0 <= 1e-12) return 0.0;  // exact match stays integral
          const double denom = cm - 2 * c0 + cp;
          if (denom <= 1e-12) return 0.0;
          return std::clamp(0.5 * (cm - cp) / denom, -0.5, 0.5);
        };
        const bool textureless = var < texture_threshold;
        double fx = 0, fy = 0;
        if (!textureless) {
          fx = best_dx + refine(at(best_dx - 1, best_dy), best, at(best_dx + 1, best_dy));
          fy = best_dy + refine(at(best_dx, best_dy - 1), best, at(best_dx, best_dy + 1));
        }
        for (std::size_t y = by; y < ey; ++y) {
          for (std::size_t x = bx; x < ex; ++x) {
            out.flow.dx(k, y, x) = static_cast<float>(fx);
            out.flow.dy(k, y, x) = static_cast<float>(fy);
            out.low_confidence[(k * H + y) * W + x] = textureless ? 1 : 0;
          }
        }
      }
    }
    prev = next;
  }
  return out;
}

/// Mean endpoint error over all pixels and frame pairs, divided by the frame
/// width.
inline double flow_error(const FlowField& pred, const FlowField& gt) {
  if (!pred.same_shape(gt)) {
    throw std::invalid_argument("flow_error: shape mismatch " + shape_str(pred.tensor().shape()) + " vs " +
                                shape_str(gt.tensor().shape()));
  }
  double acc = 0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < gt.pairs(); ++k) {
    for (std::size_t y = 0; y < gt.height(); ++y) {
      for (std::size_t x = 0; x < gt.width(); ++x) {
        const double ex = pred.dx(k, y, x) - gt.dx(k, y, x), ey = pred.dy(k, y, x) - gt.dy(k, y, x);
        acc += std::sqrt(ex * ex + ey * ey);
        ++n;
      }
    }
  }
  return acc / static_cast<double>(n) / static_cast<double>(gt.width());
}

inline constexpr std::string_view kFlowMagic = "DAVFLO01";

/// Magic, (pairs, h, w) as int32, then interleaved (dx, dy) f32 per pixel.
inline void write_flow(const std::string& path, const FlowField& flow) {
  io::Writer w(path);
  w.magic(kFlowMagic);
  w.i32(static_cast<std::int32_t>(flow.pairs()));
  w.i32(static_cast<std::int32_t>(flow.height()));
  w.i32(static_cast<std::int32_t>(flow.width()));
  for (std::size_t k = 0; k < flow.pairs(); ++k) {
    for (std::size_t y = 0; y < flow.height(); ++y) {
      for (std::size_t x = 0; x < flow.width(); ++x) {
        w.f32(flow.dx(k, y, x));
        w.f32(flow.dy(k, y, x));
      }
    }
  }
  w.close();
}

inline FlowField read_flow(const std::string& path) {
  io::Reader r(path);
  r.expect_magic(kFlowMagic);
  std::int32_t dims[3];
  for (auto& d : dims) {
    d = r.i32();
    if (d <= 0 || d > (1 << 16)) throw std::runtime_error("'" + path + "' has invalid flow dimensions");
  }
  FlowField flow(dims[0], dims[1], dims[2]);
  for (std::size_t k = 0; k < flow.pairs(); ++k) {
    for (std::size_t y = 0; y < flow.height(); ++y) {
      for (std::size_t x = 0; x < flow.width(); ++x) {
        flow.dx(k, y, x) = r.f32();
        flow.dy(k, y, x) = r.f32();
      }
    }
  }
  if (!r.at_end()) throw std::runtime_error("'" + path + "' has trailing bytes");
  return flow;
}

}  // namespace dav

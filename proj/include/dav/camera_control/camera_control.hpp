// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dav/camgen/camera_params.hpp"
#include "dav/diffkit/attention.hpp"
#include "dav/diffkit/init.hpp"

namespace dav {

inline constexpr std::size_t kCameraFreqs = 8;

/// Per input value v_i: sin(2^k v_i) for k = 0..num_freqs-1, then the
/// matching cosines. No pi factor: with |v| <= 2 the lowest band is already
/// below one period.
template <typename T>
std::vector<T> fourier_embed(const std::vector<T>& v, std::size_t num_freqs) {
  if (num_freqs == 0) throw std::invalid_argument("fourier_embed: num_freqs must be at least 1");
  std::vector<T> out;
  out.reserve(2 * num_freqs * v.size());
  for (const T x : v) {
    for (std::size_t k = 0; k < num_freqs; ++k) out.push_back(std::sin(std::ldexp(x, static_cast<int>(k))));
    for (std::size_t k = 0; k < num_freqs; ++k) out.push_back(std::cos(std::ldexp(x, static_cast<int>(k))));
  }
  return out;
}

/// Separate: pan and zoom go through their own encoders and form two
/// key/value slots. Joint: one encoder over (cx, cy, cz) and a single slot;
/// kept for the encoding ablation.
enum class CameraEncoding { kSeparate, kJoint };

struct CameraEmbedderConfig {
  std::size_t dim = 64;
  std::size_t num_freqs = kCameraFreqs;
  CameraEncoding encoding = CameraEncoding::kSeparate;

  std::size_t slots() const { return encoding == CameraEncoding::kSeparate ? 2 : 1; }
};

inline std::vector<std::string> camera_slot_names(CameraEncoding e) {
  if (e == CameraEncoding::kSeparate) return {"xy", "z"};
  return {"joint"};
}

/// Camera embedder parameters live under `cam.embed.*`.
template <typename T>
void init_camera_embedder(ParameterSet<T>& params, const CameraEmbedderConfig& cfg, std::mt19937_64& rng) {
  const std::size_t f = 2 * cfg.num_freqs;
  if (cfg.encoding == CameraEncoding::kSeparate) {
    add_linear(params, "cam.embed.xy.l1", 2 * f, cfg.dim, rng);
    add_linear(params, "cam.embed.xy.l2", cfg.dim, cfg.dim, rng);
    add_linear(params, "cam.embed.z.l1", f, cfg.dim, rng);
    add_linear(params, "cam.embed.z.l2", cfg.dim, cfg.dim, rng);
  } else {
    add_linear(params, "cam.embed.joint.l1", 3 * f, cfg.dim, rng);
    add_linear(params, "cam.embed.joint.l2", cfg.dim, cfg.dim, rng);
  }
}

/// One [samples x dim] matrix per slot, in camera_slot_names order.
template <typename T>
struct CameraSlots {
  std::vector<Var<T>> slots;
};

namespace detail {

template <typename T>
Var<T> camera_encoder(Tape<T>& tape, const std::string& name, const std::vector<std::vector<T>>& feats) {
  const std::size_t n = feats.front().size();
  Tensor<T> x({feats.size(), n});
  for (std::size_t b = 0; b < feats.size(); ++b) std::copy(feats[b].begin(), feats[b].end(), x.data() + b * n);
  auto h = silu(apply_linear(tape, "cam.embed." + name + ".l1", tape.constant(std::move(x))));
  return apply_linear(tape, "cam.embed." + name + ".l2", h);
}

}  // namespace detail

/// Embeds a batch of camera triplets. In separate mode the xy slot sees only
/// (cx, cy) and the z slot only cz.
template <typename T>
CameraSlots<T> embed_cameras(Tape<T>& tape, const std::vector<CameraParams>& cams, const CameraEmbedderConfig& cfg) {
  if (cams.empty()) throw std::invalid_argument("embed_cameras: empty batch");
  std::vector<std::vector<T>> xy, z, joint;
  for (const auto& c : cams) {
    c.validate();
    const T cx = static_cast<T>(c.cx), cy = static_cast<T>(c.cy), cz = static_cast<T>(c.cz);
    if (cfg.encoding == CameraEncoding::kSeparate) {
      xy.push_back(fourier_embed<T>({cx, cy}, cfg.num_freqs));
      z.push_back(fourier_embed<T>({cz}, cfg.num_freqs));
    } else {
      joint.push_back(fourier_embed<T>({cx, cy, cz}, cfg.num_freqs));
    }
  }
  if (cfg.encoding == CameraEncoding::kSeparate) {
    return {{detail::camera_encoder(tape, "xy", xy), detail::camera_encoder(tape, "z", z)}};
  }
  return {{detail::camera_encoder(tape, "joint", joint)}};
}

/// Plain-tensor embedding of one triplet: one [dim] vector per slot.
template <typename T>
std::vector<Tensor<T>> embed_camera(const CameraParams& cam, const ParameterSet<T>& params,
                                    const CameraEmbedderConfig& cfg) {
  Tape<T> tape(&params);
  auto slots = embed_cameras<T>(tape, {cam}, cfg);
  std::vector<Tensor<T>> out;
  for (const auto& s : slots.slots) out.push_back(s.value().reshaped({cfg.dim}));
  return out;
}

/// Per-block camera module parameters under `prefix` (e.g. `cam.block0`).
/// The gate `alpha` starts at exactly zero.
template <typename T>
void init_camera_module(ParameterSet<T>& params, const std::string& prefix, const CameraEmbedderConfig& cfg,
                        std::mt19937_64& rng) {
  add_layer_norm(params, prefix + ".ln", cfg.dim);
  add_projection(params, prefix + ".wq", cfg.dim, cfg.dim, rng);
  for (const auto& s : camera_slot_names(cfg.encoding)) {
    add_projection(params, prefix + ".wk_" + s, cfg.dim, cfg.dim, rng);
    add_projection(params, prefix + ".wv_" + s, cfg.dim, cfg.dim, rng);
  }
  add_linear(params, prefix + ".out", cfg.dim, cfg.dim, rng);
  params.add(prefix + ".alpha", Tensor<T>({1}));
}

/// Gated temporal cross-attention onto the camera slots. Rows of `h` are
/// ordered [sample][location][frame]; each (sample, location) pair attends
/// along its frames to that sample's slot keys, which are projected per slot
/// and stacked along the sequence axis. Returns h + tanh(alpha) * out.
template <typename T>
Var<T> camera_module_forward(Tape<T>& tape, const std::string& prefix, Var<T> h, const CameraSlots<T>& cam,
                             std::size_t frames, std::size_t heads) {
  const std::size_t samples = cam.slots.front().rows();
  const std::size_t nslots = cam.slots.size();
  detail::require(frames >= 1 && h.rows() % (samples * frames) == 0,
                  "camera module: " + std::to_string(h.rows()) + " rows do not split into " +
                      std::to_string(samples) + " samples of " + std::to_string(frames) + " frames");
  const std::size_t groups = h.rows() / frames;
  const std::size_t per_sample = groups / samples;
  const auto names = camera_slot_names(nslots == 2 ? CameraEncoding::kSeparate : CameraEncoding::kJoint);
  detail::require(names.size() == nslots, "camera module: unexpected slot count");

  auto q = matmul(apply_layer_norm(tape, prefix + ".ln", h), tape.param(prefix + ".wq"));
  std::vector<Var<T>> ks, vs;
  for (std::size_t s = 0; s < nslots; ++s) {
    ks.push_back(matmul(cam.slots[s], tape.param(prefix + ".wk_" + names[s])));
    vs.push_back(matmul(cam.slots[s], tape.param(prefix + ".wv_" + names[s])));
  }
  // Slot-major rows (s * samples + b) fanned out to [group][slot].
  std::vector<std::size_t> index;
  index.reserve(groups * nslots);
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t s = 0; s < nslots; ++s) index.push_back(s * samples + g / per_sample);
  }
  auto k = gather_rows(concat_rows(ks), index);
  auto v = gather_rows(concat_rows(vs), index);
  auto o = attention(q, k, v, AttentionLayout{heads, groups, false});
  auto out = apply_linear(tape, prefix + ".out", o);
  return gated_add(h, tanh(tape.param(prefix + ".alpha")), out);
}

/// Joint classifier-free guidance: eps_u + s (eps_c - eps_u). The s = 1 and
/// s = 0 endpoints return the corresponding branch exactly.
template <typename T>
Tensor<T> camera_cfg_noise(const Tensor<T>& eps_cond, const Tensor<T>& eps_uncond, double s) {
  if (eps_cond.shape() != eps_uncond.shape()) {
    throw std::invalid_argument("camera_cfg_noise: shape mismatch " + shape_str(eps_cond.shape()) + " vs " +
                                shape_str(eps_uncond.shape()));
  }
  if (s == 1.0) return eps_cond;
  if (s == 0.0) return eps_uncond;
  Tensor<T> out = eps_uncond;
  const T scale = static_cast<T>(s);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += scale * (eps_cond[i] - eps_uncond[i]);
  return out;
}

/// Camera conditioning is applied at timestep t only when t >= cutoff * t_max.
inline bool camera_active(double t, double cutoff_fraction, double t_max) {
  if (!(cutoff_fraction >= 0.0 && cutoff_fraction <= 1.0)) {
    throw std::invalid_argument("camera cut-off " + std::to_string(cutoff_fraction) + " outside [0, 1]");
  }
  if (!(t >= 0.0 && t <= t_max)) {
    throw std::invalid_argument("timestep " + std::to_string(t) + " outside [0, " + std::to_string(t_max) + "]");
  }
  return t >= cutoff_fraction * t_max;
}

}  // namespace dav

// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dav/camera_control/camera_control.hpp"
#include "dav/camgen/vocab.hpp"
#include "dav/diffkit/checkpoint.hpp"
#include "dav/denoiser/schedule.hpp"
#include "dav/diffkit/init.hpp"
#include "dav/object_control/object_control.hpp"

namespace dav {

/// Patch-token video transformer. Each block runs spatial self-attention,
/// text cross-attention, temporal self-attention, the camera module and a
/// feed-forward layer, all pre-norm residual.
struct DenoiserConfig {
  std::size_t frames = 8, height = 16, width = 16, channels = 3;
  std::size_t patch = 2;
  std::size_t dim = 64, heads = 4, blocks = 4, ff_mult = 4;
  std::size_t max_caption = 12;
  CameraEncoding camera_encoding = CameraEncoding::kSeparate;
  std::size_t camera_freqs = kCameraFreqs;
  // Noise estimate written as sigma_t x_t + alpha_t f(x_t): exact in the
  // pure-noise limit, so early sampling steps cannot blow up.
  bool noise_skip = true;

  std::size_t grid_h() const { return height / patch; }
  std::size_t grid_w() const { return width / patch; }
  std::size_t tokens_per_frame() const { return grid_h() * grid_w(); }
  std::size_t patch_dim() const { return channels * patch * patch; }
  std::size_t clip_numel() const { return frames * channels * height * width; }
  CameraEmbedderConfig camera() const { return {dim, camera_freqs, camera_encoding}; }

  void validate() const {
    auto need = [](bool ok, const std::string& what) {
      if (!ok) throw std::invalid_argument("denoiser config: " + what);
    };
    need(frames >= 2 && channels >= 1, "need at least 2 frames and 1 channel");
    need(patch >= 1 && height % patch == 0 && width % patch == 0, "patch size must divide the frame size");
    need(dim % heads == 0 && dim % 2 == 0, "dim must be even and divisible by heads");
    need(blocks >= 1 && ff_mult >= 1 && max_caption >= 2, "blocks, ff_mult and max_caption must be positive");
    need(camera_freqs >= 1, "camera_freqs must be positive");
  }
  bool operator==(const DenoiserConfig&) const = default;
};

inline bool is_camera_param(const std::string& name) { return name.rfind("cam.", 0) == 0; }
inline bool is_base_param(const std::string& name) { return !is_camera_param(name); }

template <typename T>
ParameterSet<T> init_denoiser(const DenoiserConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ParameterSet<T> p;
  const std::size_t D = cfg.dim;
  add_linear(p, "patch_in", cfg.patch_dim(), D, rng);
  p.add("pos.spatial", Tensor<T>::randn({cfg.tokens_per_frame(), D}, rng, T(0.02)));
  p.add("pos.frame", Tensor<T>::randn({cfg.frames, D}, rng, T(0.02)));
  add_linear(p, "time.l1", D, D, rng);
  add_linear(p, "time.l2", D, D, rng);
  p.add("text.tok", Tensor<T>::randn({Vocabulary::kSize, D}, rng, T(1)));
  p.add("text.pos", Tensor<T>::randn({cfg.max_caption, D}, rng, T(0.02)));
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    const std::string pre = "block" + std::to_string(b);
    for (const char* attn : {".sa", ".ca", ".ta"}) {
      add_layer_norm(p, pre + attn + ".ln", D);
      add_projection(p, pre + attn + ".wq", D, D, rng);
      add_projection(p, pre + attn + ".wk", D, D, rng);
      add_projection(p, pre + attn + ".wv", D, D, rng);
      add_linear(p, pre + attn + ".out", D, D, rng);
    }
    add_layer_norm(p, pre + ".ff.ln", D);
    add_linear(p, pre + ".ff.l1", D, cfg.ff_mult * D, rng);
    add_linear(p, pre + ".ff.l2", cfg.ff_mult * D, D, rng);
  }
  add_layer_norm(p, "head.ln", D);
  add_linear(p, "head", D, cfg.patch_dim(), rng, 0.0);
  // Camera weights draw from their own stream so the base initialization
  // does not depend on the camera encoding.
  std::mt19937_64 cam_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  init_camera_embedder(p, cfg.camera(), cam_rng);
  for (std::size_t b = 0; b < cfg.blocks; ++b) init_camera_module(p, "cam.block" + std::to_string(b), cfg.camera(), cam_rng);
  return p;
}

/// Clips [B, F, C, H, W] to patch tokens: rows (b, f, gy, gx), columns (c, dy, dx).
template <typename T>
Tensor<T> patchify(const Tensor<T>& x, const DenoiserConfig& cfg) {
  const std::size_t per = cfg.clip_numel();
  if (x.numel() % per != 0) throw std::invalid_argument("patchify: size is not a whole number of clips");
  const std::size_t B = x.numel() / per, F = cfg.frames, C = cfg.channels, H = cfg.height, W = cfg.width;
  const std::size_t p = cfg.patch, gh = cfg.grid_h(), gw = cfg.grid_w();
  Tensor<T> out({B * F * gh * gw, cfg.patch_dim()});
  std::size_t r = 0;
  for (std::size_t bf = 0; bf < B * F; ++bf) {
    for (std::size_t gy = 0; gy < gh; ++gy) {
      for (std::size_t gx = 0; gx < gw; ++gx, ++r) {
        std::size_t c = 0;
        for (std::size_t ch = 0; ch < C; ++ch) {
          for (std::size_t dy = 0; dy < p; ++dy) {
            for (std::size_t dx = 0; dx < p; ++dx, ++c) {
              out.at(r, c) = x[((bf * C + ch) * H + gy * p + dy) * W + gx * p + dx];
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> unpatchify(const Tensor<T>& tokens, const DenoiserConfig& cfg) {
  const std::size_t F = cfg.frames, C = cfg.channels, H = cfg.height, W = cfg.width;
  const std::size_t p = cfg.patch, gh = cfg.grid_h(), gw = cfg.grid_w();
  if (tokens.cols() != cfg.patch_dim() || tokens.rows() % (F * gh * gw) != 0) {
    throw std::invalid_argument("unpatchify: token shape " + shape_str(tokens.shape()) + " does not match config");
  }
  const std::size_t B = tokens.rows() / (F * gh * gw);
  Tensor<T> out({B, F, C, H, W});
  std::size_t r = 0;
  for (std::size_t bf = 0; bf < B * F; ++bf) {
    for (std::size_t gy = 0; gy < gh; ++gy) {
      for (std::size_t gx = 0; gx < gw; ++gx, ++r) {
        std::size_t c = 0;
        for (std::size_t ch = 0; ch < C; ++ch) {
          for (std::size_t dy = 0; dy < p; ++dy) {
            for (std::size_t dx = 0; dx < p; ++dx, ++c) {
              out[((bf * C + ch) * H + gy * p + dy) * W + gx * p + dx] = tokens.at(r, c);
            }
          }
        }
      }
    }
  }
  return out;
}

/// Sinusoidal features of a timestep: sin(t w_i) then cos(t w_i), w_i = 10000^(-i / (dim/2)).
inline std::vector<double> timestep_features(double t, std::size_t dim) {
  const std::size_t half = dim / 2;
  std::vector<double> out(dim);
  for (std::size_t i = 0; i < half; ++i) {
    const double w = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    out[i] = std::sin(t * w);
    out[half + i] = std::cos(t * w);
  }
  return out;
}

template <typename T>
using CrossAttentionObserver = std::function<void(std::size_t block, std::size_t sample, std::size_t frame,
                                                  std::size_t head, const RowMatrix<T>& probs)>;

/// One forward pass worth of inputs. `x` holds B clips [B, F, C, H, W].
/// An empty `cameras` skips every camera module; an empty `modulation`
/// (or a null entry) leaves that sample's cross-attention unmodulated.
template <typename T>
struct DenoiserBatch {
  Tensor<T> x;
  std::vector<double> timesteps;
  std::vector<Caption> captions;
  std::vector<CameraParams> cameras;
  std::vector<const ModulationSpec*> modulation;
  double t_max = 1000.0;
};

namespace detail {

template <typename T>
Var<T> self_attention(Tape<T>& tape, const std::string& pre, Var<T> h, std::size_t heads, std::size_t groups) {
  auto x = apply_layer_norm(tape, pre + ".ln", h);
  auto q = matmul(x, tape.param(pre + ".wq"));
  auto k = matmul(x, tape.param(pre + ".wk"));
  auto v = matmul(x, tape.param(pre + ".wv"));
  return add(h, apply_linear(tape, pre + ".out", attention(q, k, v, AttentionLayout{heads, groups, false})));
}

}  // namespace detail

/// Predicts the noise of every sample in token layout [B*F*P x patch_dim].
template <typename T>
Var<T> denoiser_forward(Tape<T>& tape, const DenoiserConfig& cfg, const DenoiserBatch<T>& in,
                        const CrossAttentionObserver<T>& observer = {}) {
  const std::size_t B = in.timesteps.size(), F = cfg.frames, P = cfg.tokens_per_frame(), D = cfg.dim;
  const std::size_t L = cfg.max_caption, N = B * F * P;
  if (B == 0 || in.x.numel() != B * cfg.clip_numel()) {
    throw std::invalid_argument("denoiser: input holds " + std::to_string(in.x.numel()) + " values for " +
                                std::to_string(B) + " clips of " + std::to_string(cfg.clip_numel()));
  }
  if (in.captions.size() != B) throw std::invalid_argument("denoiser: one caption per sample required");
  if (!in.cameras.empty() && in.cameras.size() != B) throw std::invalid_argument("denoiser: one camera per sample");
  if (!in.modulation.empty() && in.modulation.size() != B) {
    throw std::invalid_argument("denoiser: one modulation entry per sample");
  }
  for (const auto& c : in.captions) {
    if (c.size() < 2 || c.size() > L) {
      throw std::invalid_argument("denoiser: caption length " + std::to_string(c.size()) + " outside [2, " +
                                  std::to_string(L) + "]");
    }
    for (auto id : c) {
      if (id >= Vocabulary::kSize) throw std::invalid_argument("denoiser: unknown token id " + std::to_string(id));
    }
  }

  // Input tokens: patch projection + positions + timestep embedding.
  std::vector<std::size_t> spatial_idx(N), frame_idx(N), sample_idx(N);
  for (std::size_t r = 0; r < N; ++r) {
    spatial_idx[r] = r % P;
    frame_idx[r] = (r / P) % F;
    sample_idx[r] = r / (F * P);
  }
  Tensor<T> tfeat({B, D});
  for (std::size_t b = 0; b < B; ++b) {
    const auto f = timestep_features(in.timesteps[b], D);
    for (std::size_t i = 0; i < D; ++i) tfeat.at(b, i) = static_cast<T>(f[i]);
  }
  auto temb = apply_linear(tape, "time.l2", silu(apply_linear(tape, "time.l1", tape.constant(std::move(tfeat)))));
  auto h = apply_linear(tape, "patch_in", tape.constant(patchify(in.x, cfg)));
  h = add(h, gather_rows(tape.param("pos.spatial"), spatial_idx));
  h = add(h, gather_rows(tape.param("pos.frame"), frame_idx));
  h = add(h, gather_rows(temb, sample_idx));

  // Caption context, padded to max_caption; padding is masked out below.
  std::vector<std::size_t> tok_idx(B * L), pos_idx(B * L), ctx_idx(B * F * L);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t j = 0; j < L; ++j) {
      tok_idx[b * L + j] = j < in.captions[b].size() ? in.captions[b][j] : Vocabulary::kEos;
      pos_idx[b * L + j] = j;
    }
  }
  for (std::size_t g = 0; g < B * F; ++g) {
    for (std::size_t j = 0; j < L; ++j) ctx_idx[g * L + j] = (g / F) * L + j;
  }
  auto ctx = add(gather_rows(tape.param("text.tok"), tok_idx), gather_rows(tape.param("text.pos"), pos_idx));

  // Cross-attention biases per (sample, frame): padding mask plus lambda*S.
  // Blocks whose group has amplification disabled use the suppression-only term.
  bool any_bias = false, any_modulation = false;
  for (std::size_t b = 0; b < B; ++b) {
    any_bias = any_bias || in.captions[b].size() < L;
    any_modulation = any_modulation || (!in.modulation.empty() && in.modulation[b] && in.modulation[b]->active());
  }
  any_bias = any_bias || any_modulation;
  std::vector<Tensor<T>> bias_amp, bias_plain;
  if (any_bias) {
    constexpr T neg_inf = -std::numeric_limits<T>::infinity();
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t len = in.captions[b].size();
      const ModulationSpec* mod = in.modulation.empty() ? nullptr : in.modulation[b];
      if (mod && mod->active()) mod->validate(len, F);
      for (std::size_t f = 0; f < F; ++f) {
        Tensor<T> amp({P, L}), plain({P, L});
        if (mod && mod->active()) {
          const auto s = modulation_term(*mod, f, in.timesteps[b], in.t_max, cfg.grid_h(), cfg.grid_w(), len);
          ModulationSpec no_amp = *mod;
          no_amp.amplification = false;
          const auto s0 = modulation_term(no_amp, f, in.timesteps[b], in.t_max, cfg.grid_h(), cfg.grid_w(), len);
          const auto a = scaled_modulation<T>(s, mod->lambda), z = scaled_modulation<T>(s0, mod->lambda);
          for (std::size_t i = 0; i < P; ++i) {
            for (std::size_t j = 0; j < len; ++j) {
              amp.at(i, j) = a.at(i, j);
              plain.at(i, j) = z.at(i, j);
            }
          }
        }
        for (std::size_t i = 0; i < P; ++i) {
          for (std::size_t j = len; j < L; ++j) amp.at(i, j) = plain.at(i, j) = neg_inf;
        }
        bias_amp.push_back(std::move(amp));
        bias_plain.push_back(std::move(plain));
      }
    }
  }

  // Placement flags are shared by the batch: taken from the first modulated sample.
  Placement placement;
  for (const auto* m : in.modulation) {
    if (m && m->active()) {
      placement = m->placement;
      break;
    }
  }

  std::vector<std::size_t> to_temporal(N), to_frames(N);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t f = 0; f < F; ++f) {
      for (std::size_t p = 0; p < P; ++p) {
        const std::size_t fr = (b * F + f) * P + p, tr = (b * P + p) * F + f;
        to_temporal[tr] = fr;
        to_frames[fr] = tr;
      }
    }
  }

  CameraSlots<T> cam;
  const bool use_camera = !in.cameras.empty();
  if (use_camera) cam = embed_cameras<T>(tape, in.cameras, cfg.camera());

  for (std::size_t blk = 0; blk < cfg.blocks; ++blk) {
    const std::string pre = "block" + std::to_string(blk);
    h = detail::self_attention(tape, pre + ".sa", h, cfg.heads, B * F);

    auto x = apply_layer_norm(tape, pre + ".ca.ln", h);
    auto q = matmul(x, tape.param(pre + ".ca.wq"));
    auto k = gather_rows(matmul(ctx, tape.param(pre + ".ca.wk")), ctx_idx);
    auto v = gather_rows(matmul(ctx, tape.param(pre + ".ca.wv")), ctx_idx);
    const std::vector<Tensor<T>>* bias = nullptr;
    if (any_bias) bias = placement.enabled(block_group(blk, cfg.blocks)) ? &bias_amp : &bias_plain;
    AttentionObserver<T> obs;
    if (observer) {
      obs = [&, blk](std::size_t g, std::size_t head, const RowMatrix<T>& probs) {
        observer(blk, g / F, g % F, head, probs);
      };
    }
    auto o = attention(q, k, v, AttentionLayout{cfg.heads, B * F, false}, bias, obs);
    h = add(h, apply_linear(tape, pre + ".ca.out", o));

    auto ht = gather_rows(h, to_temporal);
    ht = detail::self_attention(tape, pre + ".ta", ht, cfg.heads, B * P);
    if (use_camera) ht = camera_module_forward(tape, "cam.block" + std::to_string(blk), ht, cam, F, cfg.heads);
    h = gather_rows(ht, to_frames);

    auto f1 = silu(apply_linear(tape, pre + ".ff.l1", apply_layer_norm(tape, pre + ".ff.ln", h)));
    h = add(h, apply_linear(tape, pre + ".ff.l2", f1));
  }
  auto out = apply_linear(tape, "head", apply_layer_norm(tape, "head.ln", h));
  if (!cfg.noise_skip) return out;
  const DiffusionSchedule sched(static_cast<std::size_t>(in.t_max));
  const std::size_t R = F * P, C = cfg.patch_dim();
  Tensor<T> a({N, C}), skip = patchify(in.x, cfg);
  for (std::size_t b = 0; b < B; ++b) {
    const double t = in.timesteps[b];
    if (t != std::floor(t)) throw std::invalid_argument("denoiser: timestep " + std::to_string(t) + " is not integral");
    const auto ti = static_cast<std::size_t>(t);
    const T al = static_cast<T>(sched.alpha(ti)), sg = static_cast<T>(sched.sigma(ti));
    for (std::size_t i = b * R * C; i < (b + 1) * R * C; ++i) {
      a[i] = al;
      skip[i] *= sg;
    }
  }
  return add(mul(out, tape.constant(std::move(a))), tape.constant(std::move(skip)));
}

/// Checkpoint = parameters plus the architecture as `config.*` scalars.
template <typename T>
void save_model(const std::string& path, const DenoiserConfig& cfg, const ParameterSet<T>& params) {
  ParameterSet<float> out = params.template cast<float>();
  auto put = [&](const std::string& k, std::size_t v) { out.add("config." + k, Tensor<float>({1}, static_cast<float>(v))); };
  put("frames", cfg.frames);
  put("height", cfg.height);
  put("width", cfg.width);
  put("channels", cfg.channels);
  put("patch", cfg.patch);
  put("dim", cfg.dim);
  put("heads", cfg.heads);
  put("blocks", cfg.blocks);
  put("ff_mult", cfg.ff_mult);
  put("max_caption", cfg.max_caption);
  put("camera_joint", cfg.camera_encoding == CameraEncoding::kJoint ? 1 : 0);
  put("camera_freqs", cfg.camera_freqs);
  put("noise_skip", cfg.noise_skip ? 1 : 0);
  save_checkpoint(path, out);
}

template <typename T>
struct LoadedModel {
  DenoiserConfig config;
  ParameterSet<T> params;
};

template <typename T>
LoadedModel<T> load_model(const std::string& path) {
  const auto raw = load_checkpoint<T>(path);
  LoadedModel<T> m;
  auto get = [&](const std::string& k) -> std::size_t {
    const std::string name = "config." + k;
    if (!raw.contains(name)) throw std::runtime_error(path + ": checkpoint lacks " + name);
    return static_cast<std::size_t>(std::lround(static_cast<double>(raw.value(name)[0])));
  };
  auto& c = m.config;
  c.frames = get("frames");
  c.height = get("height");
  c.width = get("width");
  c.channels = get("channels");
  c.patch = get("patch");
  c.dim = get("dim");
  c.heads = get("heads");
  c.blocks = get("blocks");
  c.ff_mult = get("ff_mult");
  c.max_caption = get("max_caption");
  c.camera_encoding = get("camera_joint") ? CameraEncoding::kJoint : CameraEncoding::kSeparate;
  c.camera_freqs = get("camera_freqs");
  c.noise_skip = get("noise_skip") != 0;
  c.validate();
  const auto expected = init_denoiser<T>(c, 0);
  for (const auto& name : expected.names()) {
    if (!raw.contains(name)) throw std::runtime_error(path + ": checkpoint lacks parameter " + name);
    if (raw.value(name).shape() != expected.value(name).shape()) {
      throw std::runtime_error(path + ": parameter " + name + " has shape " + shape_str(raw.value(name).shape()) +
                               ", expected " + shape_str(expected.value(name).shape()));
    }
    m.params.add(name, raw.value(name));
  }
  return m;
}

}  // namespace dav

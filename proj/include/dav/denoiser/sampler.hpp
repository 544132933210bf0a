// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "dav/denoiser/model.hpp"
#include "dav/denoiser/schedule.hpp"
#include "dav/denoiser/train.hpp"

namespace dav {

struct SamplerConfig {
  std::size_t steps = 50;
  double guidance = 9.0;
  double camera_cutoff = 0.85;
  std::uint64_t seed = 0;
  ModulationSpec modulation;  // inactive when it binds no tokens
  bool clip_x0 = true;        // clamp each x0 estimate to the data range [-1, 1]
};

/// Per-step view of the conditional branch's text cross-attention.
template <typename T>
using SamplerObserver = std::function<void(std::size_t step, std::size_t t, std::size_t block, std::size_t frame,
                                           std::size_t head, const RowMatrix<T>& probs)>;

struct SampleResult {
  VideoClip clip;
  std::vector<std::size_t> timesteps;
  std::vector<bool> camera_used;
};

/// Deterministic DDIM (eta = 0) with joint classifier-free guidance: the null
/// branch uses the null caption and, while the camera is active, the static
/// camera. Without a camera the camera modules are never run.
template <typename T>
SampleResult ddim_sample(const DenoiserConfig& cfg, const ParameterSet<T>& params, const Caption& caption,
                         const std::optional<CameraParams>& camera, const SamplerConfig& sc,
                         const SamplerObserver<T>& observer = {}) {
  if (!(sc.guidance >= 0.0)) throw std::invalid_argument("guidance scale must be >= 0");
  if (camera) camera->validate();
  const DiffusionSchedule sched;
  const auto ts = ddim_timesteps(sched.steps(), sc.steps);
  if (sc.modulation.active()) sc.modulation.validate(caption.size(), cfg.frames);
  std::mt19937_64 rng(sc.seed);
  Tensor<T> x = Tensor<T>::randn({1, cfg.frames, cfg.channels, cfg.height, cfg.width}, rng);
  const std::size_t n = x.numel();
  SampleResult res;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const std::size_t t = ts[i];
    const bool cam_on = camera && camera_active(static_cast<double>(t), sc.camera_cutoff, sched.t_max());
    const bool guided = sc.guidance != 1.0;
    DenoiserBatch<T> in;
    in.t_max = sched.t_max();
    in.x = Tensor<T>({guided ? 2u : 1u, cfg.frames, cfg.channels, cfg.height, cfg.width});
    std::copy(x.data(), x.data() + n, in.x.data());
    in.timesteps.push_back(static_cast<double>(t));
    in.captions.push_back(caption);
    if (cam_on) in.cameras.push_back(*camera);
    if (sc.modulation.active()) in.modulation.push_back(&sc.modulation);
    if (guided) {
      std::copy(x.data(), x.data() + n, in.x.data() + n);
      in.timesteps.push_back(static_cast<double>(t));
      in.captions.push_back(Vocabulary::null_caption());
      if (cam_on) in.cameras.push_back(CameraParams::static_camera());
      if (sc.modulation.active()) in.modulation.push_back(nullptr);
    }
    CrossAttentionObserver<T> obs;
    if (observer) {
      obs = [&](std::size_t blk, std::size_t sample, std::size_t frame, std::size_t head, const RowMatrix<T>& p) {
        if (sample == 0) observer(i, t, blk, frame, head, p);
      };
    }
    Tensor<T> eps;
    {
      Tape<T> tape(&params);
      const auto tokens = denoiser_forward(tape, cfg, in, obs).value();
      const auto all = unpatchify(tokens, cfg);
      Tensor<T> cond({n}), uncond({n});
      std::copy(all.data(), all.data() + n, cond.data());
      if (guided) {
        std::copy(all.data() + n, all.data() + 2 * n, uncond.data());
        eps = camera_cfg_noise(cond, uncond, sc.guidance);
      } else {
        eps = cond;
      }
    }
    const double a = sched.alpha(t), s = sched.sigma(t);
    const double a_prev = i + 1 < ts.size() ? sched.alpha(ts[i + 1]) : 1.0;
    const double s_prev = i + 1 < ts.size() ? sched.sigma(ts[i + 1]) : 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      double e = static_cast<double>(eps[k]);
      double x0 = (static_cast<double>(x[k]) - s * e) / a;
      if (sc.clip_x0 && std::abs(x0) > 1.0) {
        x0 = std::clamp(x0, -1.0, 1.0);
        e = (static_cast<double>(x[k]) - a * x0) / s;
      }
      x[k] = static_cast<T>(a_prev * x0 + s_prev * e);
    }
    res.timesteps.push_back(t);
    res.camera_used.push_back(cam_on);
  }
  res.clip = from_model_range(x.template cast<float>(), cfg.frames, cfg.channels, cfg.height, cfg.width);
  return res;
}

}  // namespace dav

// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "dav/camgen/augment.hpp"
#include "dav/camgen/camera_sampling.hpp"
#include "dav/camgen/synthetic.hpp"
#include "dav/denoiser/model.hpp"
#include "dav/denoiser/optimizer.hpp"
#include "dav/denoiser/schedule.hpp"

namespace dav {

/// Stage 1 trains the base model with the camera modules bypassed. Stage 2
/// freezes it and trains only the camera embedder and modules on
/// camera-augmented clips with t drawn from [t_min_stage2, t_max).
struct TrainConfig {
  int stage = 1;
  std::size_t steps = 3000;
  std::size_t batch = 8;
  AdamWConfig adam{1e-3, 0.9, 0.999, 1e-8, 0.01, 1.0};
  std::size_t warmup = 100;
  double cond_dropout = 0.1;
  std::size_t source_size = 32;
  std::size_t max_objects = 2;
  std::size_t t_min_stage2 = 400;
  std::uint64_t seed = 1;
};

/// Clips are stored in the model's [-1, 1] range.
template <typename T>
struct TrainingBatch {
  Tensor<T> x0;   // [B, F, C, H, W]
  Tensor<T> eps;  // same shape
  std::vector<std::size_t> timesteps;
  std::vector<Caption> captions;
  std::vector<CameraParams> cameras;  // empty in stage 1
};

template <typename T>
Tensor<T> to_model_range(const VideoClip& clip) {
  Tensor<T> out(clip.tensor().shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = static_cast<T>(2.0 * clip.tensor()[i] - 1.0);
  return out;
}

inline VideoClip from_model_range(const Tensor<float>& x, std::size_t frames, std::size_t channels, std::size_t h,
                                  std::size_t w) {
  VideoClip clip(frames, channels, h, w);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    clip.tensor()[i] = std::clamp(0.5f * (x[i] + 1.0f), 0.0f, 1.0f);
  }
  return clip;
}

/// Draws one synthetic training clip (rendered at source resolution, then
/// cropped/resized per the camera), its caption and its camera.
template <typename Rng>
void draw_example(Rng& rng, const DenoiserConfig& cfg, const TrainConfig& tc, VideoClip& clip, Caption& caption,
                  CameraParams& camera) {
  SyntheticSampling opt;
  opt.frames = cfg.frames;
  opt.height = tc.source_size;
  opt.width = tc.source_size;
  opt.max_objects = tc.max_objects;
  const auto spec = random_clip_spec(rng, opt);
  const auto rendered = gen_synthetic_clip(spec);
  camera = tc.stage == 2 ? sample_camera_params(rng) : CameraParams::static_camera();
  clip = aug_with_cam_motion(rendered.clip, camera, cfg.height, cfg.width);
  caption = rendered.caption;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < tc.cond_dropout) {
    caption = Vocabulary::null_caption();
    camera = CameraParams::static_camera();
  }
}

template <typename T, typename Rng>
TrainingBatch<T> draw_batch(Rng& rng, const DenoiserConfig& cfg, const TrainConfig& tc, const DiffusionSchedule& sched) {
  TrainingBatch<T> b;
  b.x0 = Tensor<T>({tc.batch, cfg.frames, cfg.channels, cfg.height, cfg.width});
  const std::size_t per = cfg.clip_numel();
  const std::size_t t_lo = tc.stage == 2 ? tc.t_min_stage2 : 0;
  std::uniform_int_distribution<std::size_t> tdist(t_lo, sched.steps() - 1);
  for (std::size_t i = 0; i < tc.batch; ++i) {
    VideoClip clip;
    Caption cap;
    CameraParams cam;
    draw_example(rng, cfg, tc, clip, cap, cam);
    const auto x = to_model_range<T>(clip);
    std::copy(x.data(), x.data() + per, b.x0.data() + i * per);
    b.captions.push_back(cap);
    if (tc.stage == 2) b.cameras.push_back(cam);
    b.timesteps.push_back(tdist(rng));
  }
  b.eps = Tensor<T>::randn(b.x0.shape(), rng);
  return b;
}

/// Mean squared error between the predicted noise (token layout) and eps.
template <typename T>
Var<T> noise_prediction_loss(Var<T> pred_tokens, const Tensor<T>& eps, const DenoiserConfig& cfg) {
  return mse(pred_tokens, patchify(eps, cfg));
}

struct TrainStepResult {
  double loss = 0;
  double grad_norm = 0;
  bool applied = false;
};

template <typename T>
std::function<bool(const std::string&)> stage_filter(int stage) {
  if (stage == 1) return is_base_param;
  if (stage == 2) return is_camera_param;
  throw std::invalid_argument("training stage must be 1 or 2, got " + std::to_string(stage));
}

/// One optimizer step on a batch. Non-finite losses abort with diagnostics;
/// non-finite gradients skip the update (reported through `applied`).
template <typename T>
TrainStepResult train_step(const DenoiserConfig& cfg, ParameterSet<T>& params, const TrainingBatch<T>& batch,
                           const DiffusionSchedule& sched, AdamW<T>& opt, int stage, double lr_scale = 1.0) {
  DenoiserBatch<T> in;
  in.x = Tensor<T>(batch.x0.shape());
  const std::size_t per = cfg.clip_numel();
  for (std::size_t b = 0; b < batch.timesteps.size(); ++b) {
    const T a = static_cast<T>(sched.alpha(batch.timesteps[b])), s = static_cast<T>(sched.sigma(batch.timesteps[b]));
    for (std::size_t i = b * per; i < (b + 1) * per; ++i) in.x[i] = a * batch.x0[i] + s * batch.eps[i];
    in.timesteps.push_back(static_cast<double>(batch.timesteps[b]));
  }
  in.captions = batch.captions;
  if (stage == 2) {
    if (batch.cameras.size() != batch.timesteps.size()) throw std::invalid_argument("stage 2 batch needs cameras");
    in.cameras = batch.cameras;
  }
  in.t_max = sched.t_max();
  params.zero_grad();
  Tape<T> tape(&params, stage_filter<T>(stage));
  auto loss = noise_prediction_loss(denoiser_forward(tape, cfg, in), batch.eps, cfg);
  const double lv = static_cast<double>(loss.value()[0]);
  if (!std::isfinite(lv)) {
    std::ostringstream os;
    os << "training loss is not finite (" << lv << ") at timesteps";
    for (auto t : batch.timesteps) os << ' ' << t;
    throw std::runtime_error(os.str());
  }
  tape.backward(loss);
  const auto rep = opt.step(params, lr_scale);
  return {lv, rep.grad_norm, rep.applied};
}

struct TrainSummary {
  std::size_t steps = 0, skipped = 0;
  double first_loss = 0, last_loss = 0;
  double seconds = 0;
};

/// Runs `tc.steps` steps, writing one JSON object per logged step to `log`.
template <typename T>
TrainSummary train(const DenoiserConfig& cfg, ParameterSet<T>& params, const TrainConfig& tc, std::ostream* log = nullptr,
                   std::size_t log_every = 50) {
  const DiffusionSchedule sched;
  AdamW<T> opt(tc.adam, stage_filter<T>(tc.stage));
  std::mt19937_64 rng(tc.seed);
  TrainSummary sum;
  const auto t0 = std::chrono::steady_clock::now();
  double window = 0;
  std::size_t window_n = 0;
  for (std::size_t step = 0; step < tc.steps; ++step) {
    const auto batch = draw_batch<T>(rng, cfg, tc, sched);
    const double warm = tc.warmup ? std::min(1.0, static_cast<double>(step + 1) / static_cast<double>(tc.warmup)) : 1.0;
    const auto r = train_step(cfg, params, batch, sched, opt, tc.stage, warm);
    if (!r.applied) ++sum.skipped;
    if (step == 0) sum.first_loss = r.loss;
    window += r.loss;
    ++window_n;
    if (log && ((step + 1) % log_every == 0 || step + 1 == tc.steps || !r.applied)) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      *log << "{\"stage\":" << tc.stage << ",\"step\":" << step + 1 << ",\"loss\":" << window / window_n
           << ",\"grad_norm\":" << r.grad_norm << ",\"skipped\":" << sum.skipped << ",\"seconds\":" << secs << "}\n";
      log->flush();
      sum.last_loss = window / window_n;
      window = 0;
      window_n = 0;
    }
  }
  if (window_n) sum.last_loss = window / window_n;
  sum.steps = tc.steps;
  sum.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sum;
}

}  // namespace dav

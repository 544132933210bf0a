// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dav/diffkit/tensor.hpp"

namespace dav {

/// Variance-preserving schedule with linear betas. alpha(t) and sigma(t)
/// are the signal and noise scales of x_t = alpha x_0 + sigma eps.
class DiffusionSchedule {
 public:
  explicit DiffusionSchedule(std::size_t steps = 1000, double beta_start = 1e-4, double beta_end = 2e-2)
      : alpha_bar_(steps) {
    if (steps < 2) throw std::invalid_argument("diffusion schedule needs at least 2 steps");
    double prod = 1.0;
    for (std::size_t t = 0; t < steps; ++t) {
      const double beta = beta_start + (beta_end - beta_start) * static_cast<double>(t) / static_cast<double>(steps - 1);
      prod *= 1.0 - beta;
      alpha_bar_[t] = prod;
    }
  }

  std::size_t steps() const { return alpha_bar_.size(); }
  double t_max() const { return static_cast<double>(alpha_bar_.size()); }

  double alpha_bar(std::size_t t) const { return alpha_bar_.at(check(t)); }
  double alpha(std::size_t t) const { return std::sqrt(alpha_bar(t)); }
  double sigma(std::size_t t) const { return std::sqrt(1.0 - alpha_bar(t)); }

 private:
  std::size_t check(std::size_t t) const {
    if (t >= alpha_bar_.size()) {
      throw std::out_of_range("timestep " + std::to_string(t) + " outside [0, " + std::to_string(alpha_bar_.size() - 1) +
                              "]");
    }
    return t;
  }
  std::vector<double> alpha_bar_;
};

/// x_t = alpha_t x0 + sigma_t eps.
template <typename T>
Tensor<T> ddpm_forward(const Tensor<T>& x0, std::size_t t, const Tensor<T>& eps, const DiffusionSchedule& schedule) {
  if (x0.shape() != eps.shape()) {
    throw std::invalid_argument("ddpm_forward: noise shape " + shape_str(eps.shape()) + " differs from " +
                                shape_str(x0.shape()));
  }
  const T a = static_cast<T>(schedule.alpha(t)), s = static_cast<T>(schedule.sigma(t));
  Tensor<T> out(x0.shape());
  for (std::size_t i = 0; i < x0.numel(); ++i) out[i] = a * x0[i] + s * eps[i];
  return out;
}

/// Strided DDIM timesteps, descending: t_max-1, t_max-1-stride, ...
inline std::vector<std::size_t> ddim_timesteps(std::size_t t_max, std::size_t count) {
  if (count == 0 || count > t_max) {
    throw std::invalid_argument("DDIM step count " + std::to_string(count) + " must lie in [1, " +
                                std::to_string(t_max) + "]");
  }
  const std::size_t stride = t_max / count;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(t_max - 1 - i * stride);
  return out;
}

}  // namespace dav

// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "dav/diffkit/tape.hpp"

namespace dav {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double grad_clip = 0.0;  // global L2 norm; 0 disables
};

/// Adam with decoupled weight decay over the parameters accepted by a filter.
template <typename T>
class AdamW {
 public:
  using Filter = std::function<bool(const std::string&)>;

  explicit AdamW(AdamWConfig cfg = {}, Filter trainable = {}) : cfg_(cfg), trainable_(std::move(trainable)) {}

  struct StepReport {
    bool applied = false;
    double grad_norm = 0;
  };

  /// Applies one update from the accumulated gradients. Returns
  /// applied = false, leaving parameters and moments untouched, when any
  /// gradient is not finite.
  StepReport step(ParameterSet<T>& params, double lr_scale = 1.0) {
    double sq = 0;
    for (auto& [name, e] : params) {
      if (!accepts(name)) continue;
      for (auto g : e.grad.values()) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    StepReport rep{false, std::sqrt(sq)};
    if (!std::isfinite(sq)) return rep;
    const double clip = cfg_.grad_clip > 0 && rep.grad_norm > cfg_.grad_clip ? cfg_.grad_clip / rep.grad_norm : 1.0;
    ++t_;
    const double lr = cfg_.lr * lr_scale;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto& [name, e] : params) {
      if (!accepts(name)) continue;
      auto& st = state_[name];
      if (st.m.empty()) {
        st.m = Tensor<double>(e.value.shape());
        st.v = Tensor<double>(e.value.shape());
      }
      for (std::size_t i = 0; i < e.value.numel(); ++i) {
        const double g = static_cast<double>(e.grad[i]) * clip;
        st.m[i] = cfg_.beta1 * st.m[i] + (1 - cfg_.beta1) * g;
        st.v[i] = cfg_.beta2 * st.v[i] + (1 - cfg_.beta2) * g * g;
        const double update = (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + cfg_.eps);
        double w = static_cast<double>(e.value[i]);
        w -= lr * (update + cfg_.weight_decay * w);
        e.value[i] = static_cast<T>(w);
      }
    }
    rep.applied = true;
    return rep;
  }

  std::size_t steps_taken() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  struct Moments {
    Tensor<double> m, v;
  };
  bool accepts(const std::string& name) const { return !trainable_ || trainable_(name); }

  AdamWConfig cfg_;
  Filter trainable_;
  std::map<std::string, Moments> state_;
  std::size_t t_ = 0;
};

}  // namespace dav

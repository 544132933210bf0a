// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "dav/diffkit/tape.hpp"

namespace dav {

/// Scalar function that writes its analytic gradient into `grad` when non-null.
using GradFn = std::function<double(const Tensor<double>& x, Tensor<double>* grad)>;

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace detail {

inline double checked_eval(const GradFn& f, const Tensor<double>& x) {
  const double v = f(x, nullptr);
  if (!std::isfinite(v)) throw std::domain_error("finite_diff_check: function value is not finite");
  return v;
}

inline void check_eps(double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw std::invalid_argument("finite_diff_check: eps " + std::to_string(eps) + " outside [1e-7, 1e-3]");
  }
}

}  // namespace detail

/// Max over coordinates of |analytic - central difference| / max(|analytic|, |central|, 1e-8).
inline double finite_diff_check(const GradFn& f, const Tensor<double>& x, double eps) {
  detail::check_eps(eps);
  Tensor<double> analytic(x.shape());
  const double f0 = f(x, &analytic);
  if (!std::isfinite(f0)) throw std::domain_error("finite_diff_check: function value is not finite");
  double worst = 0.0;
  Tensor<double> probe = x;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    probe[i] = x[i] + eps;
    const double up = detail::checked_eval(f, probe);
    probe[i] = x[i] - eps;
    const double down = detail::checked_eval(f, probe);
    probe[i] = x[i];
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2 * eps)));
  }
  return worst;
}

/// Same check with the analytic gradient taken from a recorded tape.
inline double finite_diff_check_tape(const std::function<Var<double>(Var<double>)>& build, const Tensor<double>& x,
                                     double eps) {
  GradFn f = [&](const Tensor<double>& in, Tensor<double>* grad) {
    ParameterSet<double> params;
    params.add("x", in);
    Tape<double> tape(&params);
    auto loss = build(tape.param("x"));
    if (grad) {
      tape.backward(loss);
      *grad = params.grad("x");
    }
    return loss.value()[0];
  };
  return finite_diff_check(f, x, eps);
}

/// Checks gradients of a scalar loss with respect to entries of a parameter
/// set. At most `coords_per_param` coordinates are probed per tensor (chosen
/// by `seed`); zero means all of them.
inline double finite_diff_check_params(ParameterSet<double>& params,
                                       const std::function<Var<double>(Tape<double>&)>& build, double eps,
                                       std::size_t coords_per_param = 0, std::uint64_t seed = 0,
                                       const std::function<bool(const std::string&)>& filter = {},
                                       std::string* worst_name = nullptr) {
  detail::check_eps(eps);
  params.zero_grad();
  {
    Tape<double> tape(&params);
    tape.backward(build(tape));
  }
  auto eval = [&] {
    Tape<double> tape(&params);
    const double v = build(tape).value()[0];
    if (!std::isfinite(v)) throw std::domain_error("finite_diff_check: function value is not finite");
    return v;
  };
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (const auto& name : params.names()) {
    if (filter && !filter(name)) continue;
    auto& value = params.value(name);
    const auto analytic = params.grad(name);
    std::vector<std::size_t> coords(value.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords_per_param && coords.size() > coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(coords_per_param);
    }
    for (auto i : coords) {
      const double x0 = value[i];
      value[i] = x0 + eps;
      const double up = eval();
      value[i] = x0 - eps;
      const double down = eval();
      value[i] = x0;
      const double err = relative_error(analytic[i], (up - down) / (2 * eps));
      if (err > worst) {
        worst = err;
        if (worst_name) *worst_name = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return worst;
}

}  // namespace dav

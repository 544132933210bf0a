// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <random>
#include <string>

#include "dav/diffkit/ops.hpp"

namespace dav {

/// Registers `prefix.w` [in x out] with N(0, 1/in) entries and a zero
/// `prefix.b`. `gain` rescales the weights; zero gives an all-zero layer.
template <typename T>
void add_linear(ParameterSet<T>& params, const std::string& prefix, std::size_t in, std::size_t out,
                std::mt19937_64& rng, double gain = 1.0) {
  params.add(prefix + ".w", Tensor<T>::randn({in, out}, rng, static_cast<T>(gain / std::sqrt(double(in)))));
  params.add(prefix + ".b", Tensor<T>({out}));
}

/// Bias-free projection `prefix` [in x out].
template <typename T>
void add_projection(ParameterSet<T>& params, const std::string& prefix, std::size_t in, std::size_t out,
                    std::mt19937_64& rng) {
  params.add(prefix, Tensor<T>::randn({in, out}, rng, static_cast<T>(1.0 / std::sqrt(double(in)))));
}

template <typename T>
void add_layer_norm(ParameterSet<T>& params, const std::string& prefix, std::size_t dim) {
  params.add(prefix + ".g", Tensor<T>({dim}, T(1)));
  params.add(prefix + ".b", Tensor<T>({dim}));
}

template <typename T>
Var<T> apply_linear(Tape<T>& tape, const std::string& prefix, Var<T> x) {
  return linear(x, tape.param(prefix + ".w"), tape.param(prefix + ".b"));
}

template <typename T>
Var<T> apply_layer_norm(Tape<T>& tape, const std::string& prefix, Var<T> x) {
  return layer_norm(x, tape.param(prefix + ".g"), tape.param(prefix + ".b"));
}

}  // namespace dav

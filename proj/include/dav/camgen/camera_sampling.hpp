// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <random>

#include "dav/camgen/camera_params.hpp"

namespace dav {

/// Training-time camera sampling. Each component independently: the pans are 0
/// with probability 1/3, else Uniform(-1, 1); the zoom is 1 with probability
/// 1/3, else 2^w with w ~ Uniform(-1, 1).
template <typename Rng>
CameraParams sample_camera_params(Rng& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_int_distribution<int> third(0, 2);
  CameraParams p;
  p.cx = third(rng) == 0 ? 0.0 : unit(rng);
  p.cy = third(rng) == 0 ? 0.0 : unit(rng);
  p.cz = third(rng) == 0 ? 1.0 : std::exp2(unit(rng));
  return p;
}

}  // namespace dav

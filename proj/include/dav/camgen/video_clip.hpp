// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

#include "dav/diffkit/tensor.hpp"

namespace dav {

/// Frames x channels x height x width, values in [0,1].
class VideoClip {
 public:
  VideoClip() = default;
  VideoClip(std::size_t frames, std::size_t channels, std::size_t height, std::size_t width, float fill = 0.f)
      : data_({frames, channels, height, width}, fill) {}
  explicit VideoClip(Tensor<float> data) : data_(std::move(data)) {
    if (data_.rank() != 4) throw std::invalid_argument("video clip needs rank 4, got " + shape_str(data_.shape()));
  }

  std::size_t frames() const { return data_.dim(0); }
  std::size_t channels() const { return data_.dim(1); }
  std::size_t height() const { return data_.dim(2); }
  std::size_t width() const { return data_.dim(3); }
  std::size_t plane_size() const { return height() * width(); }
  std::size_t frame_size() const { return channels() * plane_size(); }

  float& at(std::size_t f, std::size_t c, std::size_t y, std::size_t x) {
    return data_[((f * channels() + c) * height() + y) * width() + x];
  }
  float at(std::size_t f, std::size_t c, std::size_t y, std::size_t x) const {
    return data_[((f * channels() + c) * height() + y) * width() + x];
  }

  std::span<float> plane(std::size_t f, std::size_t c) {
    return {data_.data() + (f * channels() + c) * plane_size(), plane_size()};
  }
  std::span<const float> plane(std::size_t f, std::size_t c) const {
    return {data_.data() + (f * channels() + c) * plane_size(), plane_size()};
  }

  Tensor<float>& tensor() { return data_; }
  const Tensor<float>& tensor() const { return data_; }

  bool operator==(const VideoClip& o) const { return data_ == o.data_; }

 private:
  Tensor<float> data_;
};

}  // namespace dav

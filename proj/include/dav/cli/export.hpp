// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dav/camgen/video_clip.hpp"

namespace dav {

namespace detail {

inline std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

inline void require_rgb(const VideoClip& clip, const char* what) {
  if (clip.channels() != 3 && clip.channels() != 1) {
    throw std::invalid_argument(std::string(what) + ": expected 1 or 3 channels, got " + std::to_string(clip.channels()));
  }
}

inline std::uint8_t channel_byte(const VideoClip& clip, std::size_t f, std::size_t c, std::size_t y, std::size_t x) {
  return to_byte(clip.at(f, clip.channels() == 3 ? c : 0, y, x));
}

}  // namespace detail

/// Binary P6 image of one frame, nearest-neighbor upscaled by `scale`.
inline void write_ppm(const std::string& path, const VideoClip& clip, std::size_t frame, std::size_t scale = 1) {
  detail::require_rgb(clip, "write_ppm");
  if (frame >= clip.frames() || scale == 0) throw std::invalid_argument("write_ppm: bad frame or scale");
  const std::size_t H = clip.height() * scale, W = clip.width() * scale;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "P6\n" << W << " " << H << "\n255\n";
  std::vector<char> row(3 * W);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      for (std::size_t c = 0; c < 3; ++c) row[3 * x + c] = static_cast<char>(detail::channel_byte(clip, frame, c, y / scale, x / scale));
    }
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

namespace detail {

// 6x6x6 color cube followed by 40 grays.
inline std::vector<std::uint8_t> gif_palette() {
  std::vector<std::uint8_t> p;
  for (int r = 0; r < 6; ++r) {
    for (int g = 0; g < 6; ++g) {
      for (int b = 0; b < 6; ++b) {
        p.push_back(static_cast<std::uint8_t>(r * 51));
        p.push_back(static_cast<std::uint8_t>(g * 51));
        p.push_back(static_cast<std::uint8_t>(b * 51));
      }
    }
  }
  for (int i = 0; i < 40; ++i) {
    const auto v = static_cast<std::uint8_t>(std::lround(i * 255.0 / 39.0));
    p.insert(p.end(), {v, v, v});
  }
  return p;
}

inline std::uint8_t nearest_index(const std::vector<std::uint8_t>& pal, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  int best = 0, best_d = 1 << 30;
  for (int i = 0; i < 256; ++i) {
    const int dr = pal[3 * i] - r, dg = pal[3 * i + 1] - g, db = pal[3 * i + 2] - b;
    const int d = dr * dr + dg * dg + db * db;
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return static_cast<std::uint8_t>(best);
}

/// Variable-width LZW as used by GIF, 8-bit root alphabet.
inline std::vector<std::uint8_t> gif_lzw(const std::vector<std::uint8_t>& pixels) {
  constexpr int kClear = 256, kEnd = 257;
  std::vector<std::uint8_t> out;
  std::uint32_t acc = 0;
  int nbits = 0, width = 9, next = 258;
  auto emit = [&](int code) {
    acc |= static_cast<std::uint32_t>(code) << nbits;
    nbits += width;
    while (nbits >= 8) {
      out.push_back(static_cast<std::uint8_t>(acc & 0xff));
      acc >>= 8;
      nbits -= 8;
    }
  };
  std::unordered_map<std::uint32_t, int> dict;
  emit(kClear);
  int prefix = -1;
  for (std::uint8_t px : pixels) {
    if (prefix < 0) {
      prefix = px;
      continue;
    }
    const std::uint32_t key = (static_cast<std::uint32_t>(prefix) << 8) | px;
    if (auto it = dict.find(key); it != dict.end()) {
      prefix = it->second;
      continue;
    }
    emit(prefix);
    if (next < 4096) {
      dict[key] = next++;
      if (next > (1 << width) && width < 12) ++width;
    } else {
      emit(kClear);
      dict.clear();
      next = 258;
      width = 9;
    }
    prefix = px;
  }
  if (prefix >= 0) emit(prefix);
  emit(kEnd);
  if (nbits > 0) out.push_back(static_cast<std::uint8_t>(acc & 0xff));
  return out;
}

}  // namespace detail

/// Looping animated GIF89a, nearest-neighbor upscaled by `scale`.
inline void write_gif(const std::string& path, const VideoClip& clip, std::size_t scale = 8, std::uint16_t delay_cs = 12) {
  detail::require_rgb(clip, "write_gif");
  const std::size_t H = clip.height() * scale, W = clip.width() * scale;
  if (scale == 0 || H > 65535 || W > 65535) throw std::invalid_argument("write_gif: bad scale");
  const auto pal = detail::gif_palette();
  std::vector<std::uint8_t> bytes{'G', 'I', 'F', '8', '9', 'a'};
  auto u16 = [&](std::size_t v) {
    bytes.push_back(static_cast<std::uint8_t>(v & 0xff));
    bytes.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  };
  u16(W);
  u16(H);
  bytes.insert(bytes.end(), {0xF7, 0, 0});  // global table of 256 entries
  bytes.insert(bytes.end(), pal.begin(), pal.end());
  const std::uint8_t loop[] = {0x21, 0xFF, 0x0B, 'N', 'E', 'T', 'S', 'C', 'A', 'P', 'E', '2', '.', '0', 0x03, 0x01, 0, 0, 0};
  bytes.insert(bytes.end(), std::begin(loop), std::end(loop));
  std::vector<std::uint8_t> indices(H * W);
  for (std::size_t f = 0; f < clip.frames(); ++f) {
    bytes.insert(bytes.end(), {0x21, 0xF9, 0x04, 0x00});
    u16(delay_cs);
    bytes.insert(bytes.end(), {0, 0});
    bytes.push_back(0x2C);
    u16(0);
    u16(0);
    u16(W);
    u16(H);
    bytes.push_back(0);
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        indices[y * W + x] = detail::nearest_index(pal, detail::channel_byte(clip, f, 0, y / scale, x / scale),
                                                   detail::channel_byte(clip, f, 1, y / scale, x / scale),
                                                   detail::channel_byte(clip, f, 2, y / scale, x / scale));
      }
    }
    bytes.push_back(8);
    const auto data = detail::gif_lzw(indices);
    for (std::size_t i = 0; i < data.size(); i += 255) {
      const std::size_t n = std::min<std::size_t>(255, data.size() - i);
      bytes.push_back(static_cast<std::uint8_t>(n));
      bytes.insert(bytes.end(), data.begin() + static_cast<std::ptrdiff_t>(i), data.begin() + static_cast<std::ptrdiff_t>(i + n));
    }
    bytes.push_back(0);
  }
  bytes.push_back(0x3B);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace dav

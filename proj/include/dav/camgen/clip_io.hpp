// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dav/box.hpp"
#include "dav/camgen/camera_params.hpp"
#include "dav/camgen/video_clip.hpp"
#include "dav/camgen/vocab.hpp"
#include "dav/diffkit/binary_io.hpp"

namespace dav {

inline constexpr std::string_view kClipMagic = "DAVVID01";

/// Magic, then (f, c, h, w) as int32, then f32 values in row-major order.
inline void write_clip(const std::string& path, const VideoClip& clip) {
  io::Writer w(path);
  w.magic(kClipMagic);
  w.i32(static_cast<std::int32_t>(clip.frames()));
  w.i32(static_cast<std::int32_t>(clip.channels()));
  w.i32(static_cast<std::int32_t>(clip.height()));
  w.i32(static_cast<std::int32_t>(clip.width()));
  w.bytes(clip.tensor().data(), clip.tensor().numel() * sizeof(float));
  w.close();
}

inline VideoClip read_clip(const std::string& path) {
  io::Reader r(path);
  r.expect_magic(kClipMagic);
  std::int32_t dims[4];
  for (auto& d : dims) {
    d = r.i32();
    if (d <= 0 || d > (1 << 16)) throw std::runtime_error("'" + path + "' has invalid clip dimensions");
  }
  VideoClip clip(dims[0], dims[1], dims[2], dims[3]);
  r.bytes(clip.tensor().data(), clip.tensor().numel() * sizeof(float));
  if (!r.at_end()) throw std::runtime_error("'" + path + "' has trailing bytes");
  return clip;
}

/// Sidecar metadata stored next to a clip as JSON.
struct ClipMetadata {
  Caption caption;
  std::vector<std::string> object_colors;  // color key per object
  std::vector<std::vector<Box>> boxes;     // [object][frame]
  std::optional<CameraParams> camera;
};

inline nlohmann::json box_to_json(const Box& b) { return nlohmann::json::array({b.x1, b.y1, b.x2, b.y2}); }

inline Box box_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) throw std::runtime_error("box must be an array of four numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

inline nlohmann::json to_json(const ClipMetadata& m) {
  nlohmann::json j;
  j["caption"] = Vocabulary::to_text(m.caption);
  j["tokens"] = m.caption;
  auto objects = nlohmann::json::array();
  for (std::size_t i = 0; i < m.boxes.size(); ++i) {
    auto boxes = nlohmann::json::array();
    for (const auto& b : m.boxes[i]) boxes.push_back(box_to_json(b));
    objects.push_back({{"color", i < m.object_colors.size() ? m.object_colors[i] : ""}, {"boxes", boxes}});
  }
  j["objects"] = objects;
  if (m.camera) j["camera"] = {{"cx", m.camera->cx}, {"cy", m.camera->cy}, {"cz", m.camera->cz}};
  return j;
}

inline ClipMetadata metadata_from_json(const nlohmann::json& j) {
  ClipMetadata m;
  m.caption = j.at("tokens").get<Caption>();
  for (const auto& o : j.at("objects")) {
    m.object_colors.push_back(o.at("color").get<std::string>());
    std::vector<Box> boxes;
    for (const auto& b : o.at("boxes")) boxes.push_back(box_from_json(b));
    m.boxes.push_back(std::move(boxes));
  }
  if (j.contains("camera")) {
    const auto& c = j["camera"];
    m.camera = CameraParams{c.at("cx").get<double>(), c.at("cy").get<double>(), c.at("cz").get<double>()};
  }
  return m;
}

inline void write_metadata(const std::string& path, const ClipMetadata& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << to_json(m).dump(2) << '\n';
}

inline ClipMetadata read_metadata(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return metadata_from_json(nlohmann::json::parse(in));
}

}  // namespace dav

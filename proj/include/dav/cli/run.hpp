// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dav/camgen/clip_io.hpp"
#include "dav/cli/export.hpp"
#include "dav/cli/scene.hpp"
#include "dav/denoiser/sampler.hpp"
#include "dav/metrics/flow.hpp"
#include "dav/metrics/grounding.hpp"

namespace dav {

namespace fs = std::filesystem;

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a(buf.data(), buf.size());
}

/// Flow estimation defaults for desk-scale clips: block 4, search w/4.
inline EstimatedFlow estimate_clip_flow(const VideoClip& clip) {
  return estimate_flow(clip, 4, std::max<std::size_t>(1, clip.width() / 4));
}

/// Color keys and commanded per-frame boxes of every object whose phrase
/// names a color; others cannot be scored by the color detector.
struct SceneTargets {
  std::vector<ColorTarget> colors;
  GroundingTargets boxes;
};

inline SceneTargets scene_targets(const SceneSpec& s) {
  SceneTargets t;
  t.boxes.boxes.assign(s.frames, {});
  for (const auto& o : s.objects) {
    std::optional<std::size_t> color;
    for (const auto& w : o.words) {
      if (auto id = Vocabulary::find(w); id && Vocabulary::is_color(*id)) color = Vocabulary::color_index(*id);
    }
    if (!color) continue;
    const std::string key(kColors[*color].name);
    bool dup = false;
    for (const auto& c : t.colors) dup = dup || c.key == key;
    if (dup) continue;
    t.colors.push_back({key, kColors[*color].rgb});
    t.boxes.keys.push_back(key);
    const auto traj = build_box_trajectory(o.start, o.end, o.track, s.frames);
    for (std::size_t f = 0; f < s.frames; ++f) t.boxes.boxes[f].push_back(traj[f]);
  }
  return t;
}

struct RunMetrics {
  std::optional<double> flow_error;
  std::optional<double> mean_flow_x;  // mean estimated horizontal flow, px per frame pair
  std::optional<GroundingScore> grounding;
};

inline RunMetrics score_run(const VideoClip& clip, const SceneSpec& s) {
  RunMetrics m;
  const auto est = estimate_clip_flow(clip);
  double sx = 0;
  for (std::size_t k = 0; k < est.flow.pairs(); ++k) {
    for (std::size_t y = 0; y < est.flow.height(); ++y) {
      for (std::size_t x = 0; x < est.flow.width(); ++x) sx += est.flow.dx(k, y, x);
    }
  }
  m.mean_flow_x = sx / static_cast<double>(est.flow.pairs() * est.flow.height() * est.flow.width());
  if (s.use_camera) m.flow_error = flow_error(est.flow, gt_flow_from_camera(s.camera, clip.frames(), clip.height(), clip.width()));
  const auto t = scene_targets(s);
  if (!t.colors.empty()) m.grounding = miou_ap50(detect_boxes(clip, t.colors), t.boxes);
  return m;
}

inline nlohmann::json to_json(const RunMetrics& m) {
  nlohmann::json j = nlohmann::json::object();
  if (m.flow_error) j["flow_error"] = *m.flow_error;
  if (m.mean_flow_x) j["mean_flow_x"] = *m.mean_flow_x;
  if (m.grounding) {
    j["miou"] = m.grounding->miou;
    j["ap50"] = m.grounding->ap50;
  }
  return j;
}

inline SamplerConfig sampler_config(const SceneSpec& s) {
  SamplerConfig sc;
  sc.steps = s.steps;
  sc.guidance = s.guidance;
  sc.camera_cutoff = s.cutoff;
  sc.seed = s.seed;
  if (!s.objects.empty() || s.bind_background) sc.modulation = scene_modulation(s);
  return sc;
}

inline void check_scene_fits(const SceneSpec& s, const DenoiserConfig& cfg) {
  if (s.frames != cfg.frames || s.height != cfg.height || s.width != cfg.width) {
    throw std::invalid_argument("scene output " + std::to_string(s.frames) + "x" + std::to_string(s.height) + "x" +
                                std::to_string(s.width) + " does not match the checkpoint's " +
                                std::to_string(cfg.frames) + "x" + std::to_string(cfg.height) + "x" +
                                std::to_string(cfg.width));
  }
  if (s.tokens().size() > cfg.max_caption) {
    throw std::invalid_argument("caption has " + std::to_string(s.tokens().size()) + " tokens; the checkpoint allows " +
                                std::to_string(cfg.max_caption));
  }
}

template <typename T>
SampleResult sample_scene(const LoadedModel<T>& model, const SceneSpec& s, const SamplerObserver<T>& observer = {}) {
  check_scene_fits(s, model.config);
  std::optional<CameraParams> cam;
  if (s.use_camera) cam = s.camera;
  return ddim_sample(model.config, model.params, s.tokens(), cam, sampler_config(s), observer);
}

/// Everything needed to regenerate a run: the resolved scene, the
/// checkpoint and its hash, and the files written with their hashes.
struct RunManifest {
  static constexpr std::string_view kFormat = "direct-a-video-run v1";
  std::string scene_text;
  std::string checkpoint;
  std::string checkpoint_hash;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> outputs;  // file name, hash
  nlohmann::json metrics = nlohmann::json::object();
  std::size_t camera_steps = 0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = kFormat;
    j["scene"] = scene_text;
    j["checkpoint"] = {{"path", checkpoint}, {"fnv1a", checkpoint_hash}};
    j["seed"] = seed;
    auto outs = nlohmann::json::array();
    for (const auto& [f, h] : outputs) outs.push_back({{"file", f}, {"fnv1a", h}});
    j["outputs"] = outs;
    j["metrics"] = metrics;
    j["camera_steps"] = camera_steps;
    return j;
  }

  static RunManifest from_json(const nlohmann::json& j) {
    if (j.value("format", "") != kFormat) throw std::runtime_error("not a run manifest (format tag missing)");
    RunManifest m;
    m.scene_text = j.at("scene").get<std::string>();
    m.checkpoint = j.at("checkpoint").at("path").get<std::string>();
    m.checkpoint_hash = j.at("checkpoint").at("fnv1a").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& o : j.at("outputs")) m.outputs.emplace_back(o.at("file").get<std::string>(), o.at("fnv1a").get<std::string>());
    m.metrics = j.value("metrics", nlohmann::json::object());
    m.camera_steps = j.value("camera_steps", std::size_t{0});
    return m;
  }

  static RunManifest read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest '" + path + "'");
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("manifest '" + path + "': " + e.what());
    }
  }
};

/// Tracks files a command creates and deletes them unless the command
/// completes.
class OutputGuard {
 public:
  explicit OutputGuard(fs::path dir) : dir_(std::move(dir)) {
    created_dir_ = !fs::exists(dir_);
    fs::create_directories(dir_);
  }
  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    for (auto it = files_.rbegin(); it != files_.rend(); ++it) fs::remove(*it, ec);
    for (auto it = dirs_.rbegin(); it != dirs_.rend(); ++it) fs::remove(*it, ec);
    if (created_dir_) fs::remove(dir_, ec);
  }
  OutputGuard(const OutputGuard&) = delete;
  OutputGuard& operator=(const OutputGuard&) = delete;

  std::string file(const std::string& name) {
    const auto p = dir_ / name;
    if (!fs::exists(p.parent_path())) {
      fs::create_directories(p.parent_path());
      dirs_.push_back(p.parent_path());
    }
    files_.push_back(p);
    return p.string();
  }
  const fs::path& dir() const { return dir_; }
  void commit() { committed_ = true; }

 private:
  fs::path dir_;
  std::vector<fs::path> files_, dirs_;
  bool created_dir_ = false, committed_ = false;
};

struct GenerateOutcome {
  RunManifest manifest;
  SampleResult sample;
  RunMetrics metrics;
};

/// Samples a scene and writes clip, flow, frames, GIF and manifest into
/// `out_dir`. On failure nothing written by this call is left behind.
inline GenerateOutcome generate_to_dir(const std::string& checkpoint, const SceneSpec& scene, const std::string& out_dir,
                                       std::size_t image_scale = 8) {
  if (!fs::exists(checkpoint)) throw std::runtime_error("checkpoint '" + checkpoint + "' does not exist");
  const auto model = load_model<float>(checkpoint);
  OutputGuard guard(out_dir);
  GenerateOutcome g;
  g.sample = sample_scene(model, scene);
  const auto& clip = g.sample.clip;
  auto& m = g.manifest;
  m.scene_text = serialize_scene(scene);
  m.checkpoint = fs::absolute(checkpoint).string();
  m.checkpoint_hash = hex64(file_hash(checkpoint));
  m.seed = scene.seed;
  for (bool used : g.sample.camera_used) m.camera_steps += used;
  auto record = [&](const std::string& name, const std::string& path) { m.outputs.emplace_back(name, hex64(file_hash(path))); };
  if (scene.wants("clip")) {
    const auto p = guard.file("clip.davv");
    write_clip(p, clip);
    record("clip.davv", p);
  }
  if (scene.wants("flow")) {
    const auto p = guard.file("flow.davf");
    write_flow(p, estimate_clip_flow(clip).flow);
    record("flow.davf", p);
  }
  if (scene.wants("ppm")) {
    for (std::size_t f = 0; f < clip.frames(); ++f) {
      char name[32];
      std::snprintf(name, sizeof name, "frames/frame_%03zu.ppm", f);
      const auto p = guard.file(name);
      write_ppm(p, clip, f, image_scale);
      record(name, p);
    }
  }
  if (scene.wants("gif")) {
    const auto p = guard.file("clip.gif");
    write_gif(p, clip, image_scale);
    record("clip.gif", p);
  }
  g.metrics = score_run(clip, scene);
  m.metrics = to_json(g.metrics);
  {
    const auto p = guard.file("scene.txt");
    std::ofstream(p) << m.scene_text;
  }
  const auto mp = guard.file("manifest.json");
  std::ofstream out(mp);
  out << m.to_json().dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write '" + mp + "'");
  out.close();
  guard.commit();
  return g;
}

/// Reruns a manifest, refusing a checkpoint whose bytes changed.
inline GenerateOutcome generate_from_manifest(const std::string& manifest_path, const std::string& out_dir,
                                              std::size_t image_scale = 8) {
  const auto m = RunManifest::read(manifest_path);
  if (!fs::exists(m.checkpoint)) throw std::runtime_error("checkpoint '" + m.checkpoint + "' does not exist");
  if (hex64(file_hash(m.checkpoint)) != m.checkpoint_hash) {
    throw std::runtime_error("checkpoint '" + m.checkpoint + "' no longer matches the manifest hash " + m.checkpoint_hash);
  }
  return generate_to_dir(m.checkpoint, parse_scene_text(m.scene_text, manifest_path), out_dir, image_scale);
}

struct GroundingSceneOptions {
  std::size_t frames = 8, height = 16, width = 16;
  double min_size = 0.3, max_size = 0.45;
  std::size_t steps = 50;
  double guidance = 9.0;
};

/// A single-object scene: "<color> <shape> background" with the object
/// moving between random start and end boxes, camera modules bypassed.
template <typename Rng>
SceneSpec random_grounding_scene(Rng& rng, const GroundingSceneOptions& opt = {}) {
  std::uniform_int_distribution<std::size_t> color(0, kColors.size() - 1), shape(0, kShapeNames.size() - 1);
  std::uniform_real_distribution<double> size(opt.min_size, opt.max_size), unit(0.0, 1.0);
  SceneSpec s;
  const std::string c(kColors[color(rng)].name), sh(kShapeNames[shape(rng)]);
  s.caption = {c, sh, "background"};
  s.use_camera = false;
  s.frames = opt.frames;
  s.height = opt.height;
  s.width = opt.width;
  s.steps = opt.steps;
  s.guidance = opt.guidance;
  s.seed = rng() & 0xffffffffu;
  const double w = size(rng);
  auto box_at = [&] {
    const double x = (1 - w) * unit(rng), y = (1 - w) * unit(rng);
    return Box{x, y, x + w, y + w};
  };
  SceneObject o;
  o.words = {c, sh};
  o.start = box_at();
  o.end = box_at();
  s.objects.push_back(o);
  return s;
}

}  // namespace dav

// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dav/camgen/camera_params.hpp"
#include "dav/camgen/vocab.hpp"
#include "dav/object_control/object_control.hpp"

namespace dav {

inline constexpr std::string_view kSceneHeader = "direct-a-video-scene v1";

struct SceneObject {
  std::vector<std::string> words;  // contiguous phrase in the caption
  Box start, end;
  std::vector<Point> track;  // empty: straight line between box centers
  bool operator==(const SceneObject& o) const {
    if (words != o.words || !(start == o.start) || !(end == o.end) || track.size() != o.track.size()) return false;
    for (std::size_t i = 0; i < track.size(); ++i) {
      if (track[i].x != o.track[i].x || track[i].y != o.track[i].y) return false;
    }
    return true;
  }
};

struct SceneSpec {
  std::vector<std::string> caption;  // words, without start/end markers
  CameraParams camera;
  bool use_camera = true;  // false bypasses the camera modules entirely
  std::vector<SceneObject> objects;
  double lambda = 25.0, tau = 0.95;
  Placement placement;
  bool amplification = true, suppression = true, bind_background = false;
  std::uint64_t seed = 0;
  std::size_t steps = 50;
  double guidance = 9.0, cutoff = 0.85;
  std::size_t frames = 8, height = 16, width = 16;
  std::vector<std::string> formats{"clip", "flow", "ppm", "gif"};

  bool operator==(const SceneSpec&) const = default;
  Caption tokens() const { return Vocabulary::encode(caption); }
  bool wants(const std::string& fmt) const {
    for (const auto& f : formats) {
      if (f == fmt) return true;
    }
    return false;
  }
};

struct SceneDiagnostic {
  std::size_t line = 0;  // 0 when the problem is not tied to one line
  std::string message;
};

class SceneError : public std::runtime_error {
 public:
  SceneError(const std::string& source, std::vector<SceneDiagnostic> diags)
      : std::runtime_error(format(source, diags)), diagnostics_(std::move(diags)) {}
  const std::vector<SceneDiagnostic>& diagnostics() const { return diagnostics_; }

 private:
  static std::string format(const std::string& source, const std::vector<SceneDiagnostic>& diags) {
    std::string out;
    for (const auto& d : diags) {
      if (!out.empty()) out += '\n';
      out += source + ":" + (d.line ? std::to_string(d.line) + ":" : "") + " " + d.message;
    }
    return out;
  }
  std::vector<SceneDiagnostic> diagnostics_;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline std::vector<std::string> split_words(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::optional<std::size_t> find_phrase(const std::vector<std::string>& caption,
                                              const std::vector<std::string>& words, std::size_t from = 0) {
  if (words.empty() || words.size() > caption.size()) return std::nullopt;
  for (std::size_t i = from; i + words.size() <= caption.size(); ++i) {
    bool ok = true;
    for (std::size_t j = 0; j < words.size() && ok; ++j) ok = caption[i + j] == words[j];
    if (ok) return i;
  }
  return std::nullopt;
}

}  // namespace detail

/// Caption positions (counting the start marker) bound to each object:
/// the first occurrence of its phrase not already claimed by an earlier one.
inline std::vector<std::vector<std::size_t>> bind_object_tokens(const SceneSpec& s) {
  std::vector<std::vector<std::size_t>> out;
  std::set<std::size_t> used;
  for (std::size_t n = 0; n < s.objects.size(); ++n) {
    const auto& words = s.objects[n].words;
    std::optional<std::size_t> at;
    for (std::size_t from = 0;; from = *at + 1) {
      at = detail::find_phrase(s.caption, words, from);
      if (!at) break;
      bool clash = false;
      for (std::size_t j = 0; j < words.size(); ++j) clash = clash || used.count(*at + j);
      if (!clash) break;
    }
    if (!at) {
      std::string phrase;
      for (const auto& w : words) phrase += (phrase.empty() ? "" : " ") + w;
      throw std::invalid_argument("object " + std::to_string(n + 1) + ": '" + phrase + "' is not in the caption");
    }
    std::vector<std::size_t> tokens;
    for (std::size_t j = 0; j < words.size(); ++j) {
      used.insert(*at + j);
      tokens.push_back(*at + j + 1);
    }
    out.push_back(std::move(tokens));
  }
  return out;
}

/// The attention-modulation settings the scene implies for `frames` frames.
inline ModulationSpec scene_modulation(const SceneSpec& s) {
  ModulationSpec m;
  m.lambda = s.lambda;
  m.tau = s.tau;
  m.placement = s.placement;
  m.amplification = s.amplification;
  m.suppression = s.suppression;
  const auto bound = bind_object_tokens(s);
  for (std::size_t n = 0; n < s.objects.size(); ++n) {
    const auto& o = s.objects[n];
    m.objects.push_back({bound[n], build_box_trajectory(o.start, o.end, o.track, s.frames)});
  }
  if (s.bind_background) {
    const auto at = detail::find_phrase(s.caption, {"background"});
    if (!at) throw std::invalid_argument("background binding needs the word 'background' in the caption");
    m.background_token = *at + 1;
  }
  return m;
}

/// Parses scene text. Every problem found is collected and reported together.
inline SceneSpec parse_scene_text(const std::string& text, const std::string& source = "<scene>") {
  SceneSpec s;
  std::vector<SceneDiagnostic> diags;
  auto fail = [&](std::size_t line, std::string msg) { diags.push_back({line, std::move(msg)}); };

  std::istringstream in(text);
  std::string raw, section;
  std::size_t lineno = 0, header_line = 0;
  bool have_caption = false;
  std::size_t caption_line = 0;
  std::map<std::string, std::size_t> seen;  // section.key -> line, per object
  std::vector<std::size_t> object_lines;

  auto parse_num = [&](const std::string& v, std::size_t line, const std::string& key) -> std::optional<double> {
    try {
      const auto nums = parse_number_list(v);
      if (nums.size() == 1) return nums[0];
    } catch (const std::invalid_argument&) {
    }
    fail(line, key + ": expected a number, got '" + v + "'");
    return std::nullopt;
  };
  auto parse_count = [&](const std::string& v, std::size_t line, const std::string& key) -> std::optional<std::size_t> {
    const auto d = parse_num(v, line, key);
    if (!d) return std::nullopt;
    if (*d < 0 || *d != std::floor(*d) || *d > 1e15) {
      fail(line, key + ": expected a non-negative integer, got '" + v + "'");
      return std::nullopt;
    }
    return static_cast<std::size_t>(*d);
  };
  auto parse_bool = [&](const std::string& v, std::size_t line, const std::string& key) -> std::optional<bool> {
    if (v == "on" || v == "true" || v == "yes" || v == "1") return true;
    if (v == "off" || v == "false" || v == "no" || v == "0") return false;
    fail(line, key + ": expected on/off, got '" + v + "'");
    return std::nullopt;
  };
  auto parse_box = [&](const std::string& v, std::size_t line, const std::string& key) -> std::optional<Box> {
    std::vector<double> n;
    try {
      n = parse_number_list(v);
    } catch (const std::invalid_argument&) {
    }
    if (n.size() != 4) {
      fail(line, key + ": malformed box '" + v + "', expected x1,y1,x2,y2");
      return std::nullopt;
    }
    const Box b{n[0], n[1], n[2], n[3]};
    if (b.degenerate() || !b.normalized()) {
      fail(line, key + ": malformed box '" + v + "', need 0 <= x1 < x2 <= 1 and 0 <= y1 < y2 <= 1");
      return std::nullopt;
    }
    return b;
  };

  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (!header_line) {
      header_line = lineno;
      if (line != kSceneHeader) {
        fail(lineno, "expected the header '" + std::string(kSceneHeader) + "'");
        break;
      }
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') {
        fail(lineno, "malformed section header '" + line + "'");
        continue;
      }
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section == "object") {
        s.objects.emplace_back();
        object_lines.push_back(lineno);
      } else if (section != "camera" && section != "modulation" && section != "sampler" && section != "output") {
        fail(lineno, "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(lineno, "expected 'key = value'");
      continue;
    }
    const std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
    const std::string scoped = (section.empty() ? "" : section + (section == "object" ? std::to_string(s.objects.size()) : "") + ".") + key;
    if (seen.count(scoped)) {
      fail(lineno, "duplicate key '" + key + "' (first on line " + std::to_string(seen[scoped]) + ")");
      continue;
    }
    seen[scoped] = lineno;
    const std::string where = section.empty() ? key : section + "." + key;

    if (section.empty()) {
      if (key == "caption") {
        have_caption = true;
        caption_line = lineno;
        s.caption = detail::split_words(value);
      } else {
        fail(lineno, "unknown key '" + key + "'");
      }
    } else if (section == "camera") {
      if (key == "cx" || key == "cy" || key == "cz") {
        if (auto v = parse_num(value, lineno, where)) (key == "cx" ? s.camera.cx : key == "cy" ? s.camera.cy : s.camera.cz) = *v;
        CameraParams probe = CameraParams::static_camera();
        (key == "cx" ? probe.cx : key == "cy" ? probe.cy : probe.cz) = key == "cx" ? s.camera.cx : key == "cy" ? s.camera.cy : s.camera.cz;
        if (auto e = probe.range_error(); !e.empty()) fail(lineno, "camera: " + e);
      } else if (key == "enabled") {
        if (auto v = parse_bool(value, lineno, where)) s.use_camera = *v;
      } else {
        fail(lineno, "unknown key '" + key + "' in [camera]");
      }
    } else if (section == "object") {
      auto& o = s.objects.back();
      if (key == "words") {
        o.words = detail::split_words(value);
        if (o.words.empty()) fail(lineno, "object.words: empty phrase");
      } else if (key == "start" || key == "end") {
        if (auto b = parse_box(value, lineno, where)) (key == "start" ? o.start : o.end) = *b;
      } else if (key == "track") {
        std::size_t pos = 0;
        while (pos <= value.size()) {
          auto semi = value.find(';', pos);
          if (semi == std::string::npos) semi = value.size();
          const std::string item = detail::trim(value.substr(pos, semi - pos));
          std::vector<double> xy;
          try {
            xy = parse_number_list(item);
          } catch (const std::invalid_argument&) {
          }
          if (xy.size() != 2 || xy[0] < 0 || xy[0] > 1 || xy[1] < 0 || xy[1] > 1) {
            fail(lineno, "object.track: malformed point '" + item + "', expected x,y in [0,1]");
            o.track.clear();
            break;
          }
          o.track.push_back({xy[0], xy[1]});
          pos = semi + 1;
        }
      } else {
        fail(lineno, "unknown key '" + key + "' in [object]");
      }
    } else if (section == "modulation") {
      if (key == "lambda") {
        if (auto v = parse_num(value, lineno, where)) {
          if (*v < 0) fail(lineno, "modulation.lambda must be >= 0");
          s.lambda = *v;
        }
      } else if (key == "tau") {
        if (auto v = parse_num(value, lineno, where)) {
          if (*v < 0 || *v > 1) fail(lineno, "modulation.tau must lie in [0, 1]");
          s.tau = *v;
        }
      } else if (key == "placement") {
        try {
          s.placement = parse_placement(value);
        } catch (const std::invalid_argument& e) {
          fail(lineno, e.what());
        }
      } else if (key == "amplification" || key == "suppression" || key == "background") {
        if (auto v = parse_bool(value, lineno, where)) {
          (key == "amplification" ? s.amplification : key == "suppression" ? s.suppression : s.bind_background) = *v;
        }
      } else {
        fail(lineno, "unknown key '" + key + "' in [modulation]");
      }
    } else if (section == "sampler") {
      if (key == "seed") {
        if (auto v = parse_count(value, lineno, where)) s.seed = *v;
      } else if (key == "steps") {
        if (auto v = parse_count(value, lineno, where)) {
          if (*v < 1 || *v > 1000) fail(lineno, "sampler.steps must lie in [1, 1000]");
          s.steps = *v;
        }
      } else if (key == "guidance") {
        if (auto v = parse_num(value, lineno, where)) {
          if (*v < 0) fail(lineno, "sampler.guidance must be >= 0");
          s.guidance = *v;
        }
      } else if (key == "cutoff") {
        if (auto v = parse_num(value, lineno, where)) {
          if (*v < 0 || *v > 1) fail(lineno, "sampler.cutoff must lie in [0, 1]");
          s.cutoff = *v;
        }
      } else {
        fail(lineno, "unknown key '" + key + "' in [sampler]");
      }
    } else if (section == "output") {
      if (key == "frames" || key == "height" || key == "width") {
        if (auto v = parse_count(value, lineno, where)) {
          if (*v < (key == "frames" ? 2u : 1u)) fail(lineno, "output." + key + " is too small");
          (key == "frames" ? s.frames : key == "height" ? s.height : s.width) = *v;
        }
      } else if (key == "formats") {
        s.formats.clear();
        std::string v = value;
        for (auto& c : v) c = c == ',' ? ' ' : c;
        for (const auto& f : detail::split_words(v)) {
          if (f != "clip" && f != "flow" && f != "ppm" && f != "gif") {
            fail(lineno, "output.formats: unknown format '" + f + "' (expected clip, flow, ppm, gif)");
          } else {
            s.formats.push_back(f);
          }
        }
      } else {
        fail(lineno, "unknown key '" + key + "' in [output]");
      }
    }
  }
  if (!header_line) fail(0, "empty scene; expected the header '" + std::string(kSceneHeader) + "'");

  if (header_line && diags.empty() && !have_caption) fail(0, "missing 'caption'");
  if (have_caption) {
    if (s.caption.empty()) fail(caption_line, "caption is empty");
    for (const auto& w : s.caption) {
      const auto id = Vocabulary::find(w);
      if (!id || *id == Vocabulary::kSos || *id == Vocabulary::kEos) fail(caption_line, "unknown token word '" + w + "'");
    }
  }
  for (std::size_t n = 0; n < s.objects.size(); ++n) {
    const auto& o = s.objects[n];
    const std::size_t line = object_lines[n];
    const std::string obj = "object " + std::to_string(n + 1);
    if (o.words.empty()) fail(line, obj + ": missing 'words'");
    const std::string k = "object" + std::to_string(n + 1) + ".";
    if (!seen.count(k + "start")) fail(line, obj + ": missing 'start' box");
    if (!seen.count(k + "end")) fail(line, obj + ": missing 'end' box");
    for (const auto& w : o.words) {
      if (have_caption && !detail::find_phrase(s.caption, {w})) {
        fail(seen.count(k + "words") ? seen[k + "words"] : line, obj + ": unknown token word '" + w + "' (not in the caption)");
      }
    }
  }
  if (s.bind_background && have_caption && !detail::find_phrase(s.caption, {"background"})) {
    fail(seen.count("modulation.background") ? seen["modulation.background"] : 0,
         "modulation.background needs the word 'background' in the caption");
  }
  // Cross-field checks only once the fields themselves are sound.
  if (diags.empty()) {
    try {
      bind_object_tokens(s);
    } catch (const std::invalid_argument& e) {
      fail(0, e.what());
    }
    for (std::size_t n = 0; n < s.objects.size(); ++n) {
      try {
        build_box_trajectory(s.objects[n].start, s.objects[n].end, s.objects[n].track, s.frames);
      } catch (const std::invalid_argument& e) {
        fail(object_lines[n], "object " + std::to_string(n + 1) + ": " + e.what());
      }
    }
  }
  if (!diags.empty()) throw SceneError(source, std::move(diags));
  return s;
}

inline SceneSpec parse_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scene '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_scene_text(os.str(), path);
}

/// Canonical text with every field written out.
inline std::string serialize_scene(const SceneSpec& s) {
  using detail::fmt_double;
  std::ostringstream os;
  auto join = [](const std::vector<std::string>& w, const char* sep) {
    std::string out;
    for (const auto& x : w) out += (out.empty() ? "" : sep) + x;
    return out;
  };
  auto box = [&](const Box& b) {
    return fmt_double(b.x1) + ", " + fmt_double(b.y1) + ", " + fmt_double(b.x2) + ", " + fmt_double(b.y2);
  };
  os << kSceneHeader << "\n";
  os << "caption = " << join(s.caption, " ") << "\n\n";
  os << "[camera]\n";
  os << "enabled = " << (s.use_camera ? "on" : "off") << "\n";
  os << "cx = " << fmt_double(s.camera.cx) << "\ncy = " << fmt_double(s.camera.cy) << "\ncz = " << fmt_double(s.camera.cz)
     << "\n\n";
  for (const auto& o : s.objects) {
    os << "[object]\nwords = " << join(o.words, " ") << "\nstart = " << box(o.start) << "\nend = " << box(o.end) << "\n";
    if (!o.track.empty()) {
      os << "track = ";
      for (std::size_t i = 0; i < o.track.size(); ++i) {
        os << (i ? "; " : "") << fmt_double(o.track[i].x) << ", " << fmt_double(o.track[i].y);
      }
      os << "\n";
    }
    os << "\n";
  }
  os << "[modulation]\nlambda = " << fmt_double(s.lambda) << "\ntau = " << fmt_double(s.tau)
     << "\nplacement = " << s.placement.str() << "\namplification = " << (s.amplification ? "on" : "off")
     << "\nsuppression = " << (s.suppression ? "on" : "off") << "\nbackground = " << (s.bind_background ? "on" : "off")
     << "\n\n";
  os << "[sampler]\nseed = " << s.seed << "\nsteps = " << s.steps << "\nguidance = " << fmt_double(s.guidance)
     << "\ncutoff = " << fmt_double(s.cutoff) << "\n\n";
  os << "[output]\nframes = " << s.frames << "\nheight = " << s.height << "\nwidth = " << s.width
     << "\nformats = " << join(s.formats, ", ") << "\n";
  return os.str();
}

}  // namespace dav

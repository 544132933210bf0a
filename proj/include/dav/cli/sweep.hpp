// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "dav/cli/run.hpp"

namespace dav {

struct GroundingCell {
  double miou = 0, ap50 = 0;
};

/// Mean detector score of a model over scenes, all sampled with `edit`
/// applied to each scene first.
template <typename T, typename Edit>
GroundingCell score_scenes(const LoadedModel<T>& model, const std::vector<SceneSpec>& scenes, Edit edit) {
  GroundingCell cell;
  std::size_t n = 0;
  for (auto s : scenes) {
    edit(s);
    const auto clip = sample_scene(model, s).clip;
    const auto t = scene_targets(s);
    if (t.colors.empty()) continue;
    const auto g = miou_ap50(detect_boxes(clip, t.colors), t.boxes);
    cell.miou += g.miou;
    cell.ap50 += g.ap50;
    ++n;
  }
  if (n) {
    cell.miou /= static_cast<double>(n);
    cell.ap50 /= static_cast<double>(n);
  }
  return cell;
}

struct StrengthSweep {
  std::vector<double> lambdas, taus;
  std::vector<std::vector<GroundingCell>> cells;  // [lambda][tau]

  /// mIoU grid: rows lambda, columns tau as a fraction of t_max.
  std::string table() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << "lambda\\tau";
    for (double t : taus) os << '\t' << t << 'T';
    os << '\n';
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
      os << std::setprecision(2) << lambdas[i] << std::setprecision(4);
      for (const auto& c : cells[i]) os << '\t' << c.miou;
      os << '\n';
    }
    return os.str();
  }
};

template <typename T>
StrengthSweep sweep_strength(const LoadedModel<T>& model, const std::vector<SceneSpec>& scenes,
                             const std::vector<double>& lambdas, const std::vector<double>& taus) {
  StrengthSweep out{lambdas, taus, {}};
  for (double l : lambdas) {
    out.cells.emplace_back();
    for (double t : taus) {
      out.cells.back().push_back(score_scenes(model, scenes, [&](SceneSpec& s) {
        s.lambda = l;
        s.tau = t;
      }));
    }
  }
  return out;
}

struct PlacementRow {
  Placement placement;
  GroundingCell score;
};

/// Every subset of {E, M, D}, empty set first.
inline std::vector<Placement> all_placements() {
  std::vector<Placement> out;
  for (int mask = 0; mask < 8; ++mask) out.push_back({(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0});
  return out;
}

inline std::string placement_table(const std::vector<PlacementRow>& rows) {
  std::ostringstream os;
  os << "E\tM\tD\tmIoU\tAP50\n" << std::fixed;
  for (const auto& r : rows) {
    os << (r.placement.encoder ? "x" : "-") << '\t' << (r.placement.middle ? "x" : "-") << '\t'
       << (r.placement.decoder ? "x" : "-") << '\t' << std::setprecision(4) << r.score.miou << '\t'
       << std::setprecision(2) << r.score.ap50 << '\n';
  }
  return os.str();
}

template <typename T>
std::vector<PlacementRow> sweep_placement(const LoadedModel<T>& model, const std::vector<SceneSpec>& scenes,
                                          const std::vector<Placement>& placements = all_placements()) {
  std::vector<PlacementRow> rows;
  for (const auto& p : placements) {
    rows.push_back({p, score_scenes(model, scenes, [&](SceneSpec& s) { s.placement = p; })});
  }
  return rows;
}

}  // namespace dav

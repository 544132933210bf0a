// Copyright 2026 The Direct-a-Video Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dav/cli/sweep.hpp"
#include "dav/denoiser/train.hpp"

namespace dav {

namespace detail {

inline std::vector<double> parse_list_flag(const std::string& flag, const std::string& text) {
  try {
    return parse_number_list(text);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(flag + ": " + e.what());
  }
}

inline std::vector<fs::path> find_manifests(const fs::path& root) {
  std::vector<fs::path> out;
  if (!fs::is_directory(root)) throw std::runtime_error("'" + root.string() + "' is not a directory");
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().filename() == "manifest.json") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace detail

struct GenerateOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::optional<double> guidance, cutoff, lambda, tau;
  std::optional<std::string> placement, cam;

  bool any() const { return seed || steps || guidance || cutoff || lambda || tau || placement || cam; }

  void apply(SceneSpec& s) const {
    if (seed) s.seed = *seed;
    if (steps) {
      if (*steps < 1 || *steps > 1000) throw std::invalid_argument("--steps must lie in [1, 1000]");
      s.steps = *steps;
    }
    if (guidance) {
      if (*guidance < 0) throw std::invalid_argument("--guidance must be >= 0");
      s.guidance = *guidance;
    }
    if (cutoff) {
      if (*cutoff < 0 || *cutoff > 1) throw std::invalid_argument("--cutoff must lie in [0, 1]");
      s.cutoff = *cutoff;
    }
    if (lambda) {
      if (*lambda < 0) throw std::invalid_argument("--lambda must be >= 0");
      s.lambda = *lambda;
    }
    if (tau) {
      if (*tau < 0 || *tau > 1) throw std::invalid_argument("--tau must lie in [0, 1]");
      s.tau = *tau;
    }
    if (placement) s.placement = parse_placement(*placement);
    if (cam) {
      s.camera = parse_camera(*cam);
      s.use_camera = true;
    }
  }
};

/// The `dav` command line. Returns the process exit status.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Camera- and object-motion-controlled toy video diffusion"};
  app.require_subcommand(1);

  // synthdata
  auto* synth = app.add_subcommand("synthdata", "Render synthetic clips with metadata");
  std::size_t synth_count = 16, synth_size = 64, synth_frames = 8, synth_objects = 2;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  synth->add_option("--count", synth_count, "Number of clips")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "Random seed");
  synth->add_option("--size", synth_size, "Frame height and width in pixels")->check(CLI::Range(4, 4096));
  synth->add_option("--frames", synth_frames, "Frames per clip")->check(CLI::Range(2, 1024));
  synth->add_option("--max-objects", synth_objects, "Objects per clip (1..n)")->check(CLI::Range(0, 6));
  synth->add_option("--out", synth_out, "Output directory")->required();

  // augment
  auto* aug = app.add_subcommand("augment", "Apply camera-motion augmentation to a clip");
  std::string aug_in, aug_cam, aug_out;
  std::optional<std::size_t> aug_h, aug_w;
  aug->add_option("--in", aug_in, "Input clip file")->required();
  aug->add_option("--cam", aug_cam, "Camera triplet cx,cy,cz")->required();
  aug->add_option("--out", aug_out, "Output clip file")->required();
  aug->add_option("--height", aug_h, "Output height (default: input)");
  aug->add_option("--width", aug_w, "Output width (default: input)");

  // train
  auto* tr = app.add_subcommand("train", "Train stage 1 (base) or stage 2 (camera modules)");
  int tr_stage = 1;
  TrainConfig tc;
  std::string tr_out, tr_init, tr_log, tr_encoding = "separate";
  tr->add_option("--stage", tr_stage, "1 or 2")->check(CLI::IsMember({1, 2}));
  tr->add_option("--out", tr_out, "Output checkpoint")->required();
  tr->add_option("--init", tr_init, "Checkpoint to start from (required for stage 2)");
  tr->add_option("--steps", tc.steps, "Optimizer steps")->check(CLI::PositiveNumber);
  tr->add_option("--batch", tc.batch, "Batch size")->check(CLI::PositiveNumber);
  tr->add_option("--seed", tc.seed, "Random seed");
  tr->add_option("--lr", tc.adam.lr, "Peak learning rate")->check(CLI::PositiveNumber);
  tr->add_option("--log", tr_log, "Step/loss log (JSON lines; default <out>.log.jsonl)");
  tr->add_option("--camera-encoding", tr_encoding, "separate or joint (fresh models only)")
      ->check(CLI::IsMember({"separate", "joint"}));

  // generate
  auto* gen = app.add_subcommand("generate", "Sample a clip for a scene");
  std::string gen_scene, gen_manifest, gen_ckpt, gen_out;
  std::size_t gen_scale = 8;
  GenerateOverrides ov;
  auto* scene_opt = gen->add_option("--scene", gen_scene, "Scene file");
  auto* manifest_opt = gen->add_option("--manifest", gen_manifest, "Rerun a manifest exactly");
  scene_opt->excludes(manifest_opt);
  gen->add_option("--checkpoint", gen_ckpt, "Model checkpoint");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--image-scale", gen_scale, "Upscale factor for PPM/GIF")->check(CLI::Range(1, 64));
  gen->add_option("--seed", ov.seed, "Override the scene seed");
  gen->add_option("--steps", ov.steps, "Override DDIM steps");
  gen->add_option("--guidance", ov.guidance, "Override guidance scale");
  gen->add_option("--cutoff", ov.cutoff, "Override camera cut-off fraction");
  gen->add_option("--lambda", ov.lambda, "Override modulation strength");
  gen->add_option("--tau", ov.tau, "Override amplification cut-off fraction");
  gen->add_option("--placement", ov.placement, "Override placement, e.g. E,M,D");
  gen->add_option("--cam", ov.cam, "Override camera cx,cy,cz");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score generated runs");
  std::string ev_runs, ev_out;
  ev->add_option("--runs", ev_runs, "Directory searched for manifest.json files")->required();
  ev->add_option("--out", ev_out, "Also write records to this file");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Grid over modulation strength or placement");
  std::string sw_ckpt, sw_out, sw_scenes, sw_lambda, sw_tau;
  std::size_t sw_random = 10, sw_steps = 50;
  std::uint64_t sw_seed = 0;
  bool sw_placement = false;
  sw->add_option("--checkpoint", sw_ckpt, "Model checkpoint")->required();
  sw->add_option("--out", sw_out, "Output directory")->required();
  sw->add_option("--scenes", sw_scenes, "Comma-separated scene files (default: random single-object scenes)");
  sw->add_option("--random-scenes", sw_random, "Number of random scenes")->check(CLI::PositiveNumber);
  sw->add_option("--seed", sw_seed, "Seed for random scenes");
  sw->add_option("--steps", sw_steps, "DDIM steps for random scenes")->check(CLI::Range(1, 1000));
  sw->add_option("--lambda", sw_lambda, "Strength values, e.g. 5,10,25,50");
  sw->add_option("--tau", sw_tau, "Cut-off fractions, e.g. 0.8,0.85,0.9,0.95");
  sw->add_flag("--placement-grid", sw_placement, "Sweep every E/M/D subset");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*synth) {
      OutputGuard guard(synth_out);
      std::mt19937_64 rng(synth_seed);
      SyntheticSampling opt;
      opt.frames = synth_frames;
      opt.height = opt.width = synth_size;
      opt.max_objects = synth_objects;
      for (std::size_t i = 0; i < synth_count; ++i) {
        const auto spec = random_clip_spec(rng, opt);
        const auto clip = gen_synthetic_clip(spec);
        char name[32];
        std::snprintf(name, sizeof name, "clip_%04zu", i);
        write_clip(guard.file(std::string(name) + ".davv"), clip.clip);
        ClipMetadata meta{clip.caption, {}, clip.boxes, CameraParams::static_camera()};
        for (const auto& o : spec.objects) meta.object_colors.emplace_back(kColors[o.color].name);
        write_metadata(guard.file(std::string(name) + ".json"), meta);
      }
      guard.commit();
      out << "wrote " << synth_count << " clips to " << synth_out << "\n";
    } else if (*aug) {
      const auto cam = parse_camera(aug_cam);
      const auto src = read_clip(aug_in);
      const auto res = aug_with_cam_motion(src, cam, aug_h.value_or(src.height()), aug_w.value_or(src.width()));
      const fs::path tmp = aug_out + ".partial";
      try {
        write_clip(tmp.string(), res);
        fs::rename(tmp, aug_out);
      } catch (...) {
        std::error_code ec;
        fs::remove(tmp, ec);
        throw;
      }
      out << "wrote " << aug_out << "\n";
    } else if (*tr) {
      tc.stage = tr_stage;
      DenoiserConfig cfg;
      ParameterSet<float> params;
      if (!tr_init.empty()) {
        if (!fs::exists(tr_init)) throw std::runtime_error("checkpoint '" + tr_init + "' does not exist");
        auto m = load_model<float>(tr_init);
        cfg = m.config;
        params = std::move(m.params);
      } else if (tr_stage == 2) {
        throw std::runtime_error("stage 2 trains on top of a stage-1 checkpoint; pass --init");
      } else {
        cfg.camera_encoding = tr_encoding == "joint" ? CameraEncoding::kJoint : CameraEncoding::kSeparate;
        params = init_denoiser<float>(cfg, tc.seed);
      }
      const std::string log_path = tr_log.empty() ? tr_out + ".log.jsonl" : tr_log;
      const std::string tmp = tr_out + ".partial";
      try {
        std::ofstream log(log_path);
        if (!log) throw std::runtime_error("cannot open '" + log_path + "'");
        const auto sum = train(cfg, params, tc, &log, 50);
        save_model(tmp, cfg, params);
        fs::rename(tmp, tr_out);
        out << "stage " << tr_stage << ": " << sum.steps << " steps, loss " << sum.first_loss << " -> " << sum.last_loss
            << ", " << sum.skipped << " skipped, " << sum.seconds << " s\n";
      } catch (...) {
        std::error_code ec;
        fs::remove(tmp, ec);
        fs::remove(log_path, ec);
        throw;
      }
    } else if (*gen) {
      GenerateOutcome g;
      if (!gen_manifest.empty()) {
        if (ov.any() || !gen_ckpt.empty()) throw std::invalid_argument("--manifest reruns exactly; drop the overrides");
        g = generate_from_manifest(gen_manifest, gen_out, gen_scale);
      } else {
        if (gen_scene.empty()) throw std::invalid_argument("generate needs --scene or --manifest");
        if (gen_ckpt.empty()) throw std::invalid_argument("generate needs --checkpoint");
        auto scene = parse_scene(gen_scene);
        ov.apply(scene);
        g = generate_to_dir(gen_ckpt, scene, gen_out, gen_scale);
      }
      out << "wrote " << gen_out << " " << g.manifest.metrics.dump() << "\n";
    } else if (*ev) {
      std::ofstream file;
      if (!ev_out.empty()) {
        file.open(ev_out);
        if (!file) throw std::runtime_error("cannot open '" + ev_out + "'");
      }
      double fe = 0, miou = 0, ap = 0;
      std::size_t nf = 0, ng = 0;
      for (const auto& mp : detail::find_manifests(ev_runs)) {
        const auto m = RunManifest::read(mp.string());
        const auto scene = parse_scene_text(m.scene_text, mp.string());
        const auto clip_path = mp.parent_path() / "clip.davv";
        if (!fs::exists(clip_path)) throw std::runtime_error("run '" + mp.parent_path().string() + "' has no clip.davv");
        const auto metrics = score_run(read_clip(clip_path.string()), scene);
        auto rec = to_json(metrics);
        rec["run"] = fs::relative(mp.parent_path(), ev_runs).string();
        out << rec.dump() << "\n";
        if (file) file << rec.dump() << "\n";
        if (metrics.flow_error) {
          fe += *metrics.flow_error;
          ++nf;
        }
        if (metrics.grounding) {
          miou += metrics.grounding->miou;
          ap += metrics.grounding->ap50;
          ++ng;
        }
      }
      nlohmann::json summary{{"summary", true}, {"runs_with_camera", nf}, {"runs_with_objects", ng}};
      if (nf) summary["flow_error"] = fe / static_cast<double>(nf);
      if (ng) {
        summary["miou"] = miou / static_cast<double>(ng);
        summary["ap50"] = ap / static_cast<double>(ng);
      }
      out << summary.dump() << "\n";
      if (file) file << summary.dump() << "\n";
    } else if (*sw) {
      if (!fs::exists(sw_ckpt)) throw std::runtime_error("checkpoint '" + sw_ckpt + "' does not exist");
      const bool strength = !sw_lambda.empty() || !sw_tau.empty();
      if (strength == sw_placement) throw std::invalid_argument("sweep needs either --lambda/--tau or --placement-grid");
      const auto model = load_model<float>(sw_ckpt);
      std::vector<SceneSpec> scenes;
      if (!sw_scenes.empty()) {
        std::size_t pos = 0;
        while (pos <= sw_scenes.size()) {
          auto c = sw_scenes.find(',', pos);
          if (c == std::string::npos) c = sw_scenes.size();
          scenes.push_back(parse_scene(sw_scenes.substr(pos, c - pos)));
          pos = c + 1;
        }
      } else {
        std::mt19937_64 rng(sw_seed);
        GroundingSceneOptions opt;
        opt.frames = model.config.frames;
        opt.height = model.config.height;
        opt.width = model.config.width;
        opt.steps = sw_steps;
        for (std::size_t i = 0; i < sw_random; ++i) scenes.push_back(random_grounding_scene(rng, opt));
      }
      OutputGuard guard(sw_out);
      std::string table, name;
      if (strength) {
        const auto lambdas = sw_lambda.empty() ? std::vector<double>{25.0} : detail::parse_list_flag("--lambda", sw_lambda);
        const auto taus = sw_tau.empty() ? std::vector<double>{0.95} : detail::parse_list_flag("--tau", sw_tau);
        for (double l : lambdas) {
          if (l < 0) throw std::invalid_argument("--lambda values must be >= 0");
        }
        for (double t : taus) {
          if (t < 0 || t > 1) throw std::invalid_argument("--tau values must lie in [0, 1]");
        }
        table = sweep_strength(model, scenes, lambdas, taus).table();
        name = "sweep_strength.tsv";
      } else {
        table = placement_table(sweep_placement(model, scenes));
        name = "sweep_placement.tsv";
      }
      std::ofstream f(guard.file(name));
      f << table;
      f.close();
      if (!f) throw std::runtime_error("cannot write the sweep table");
      guard.commit();
      out << table;
    }
  } catch (const SceneError& e) {
    err << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace dav

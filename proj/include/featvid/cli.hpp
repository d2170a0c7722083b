#pragma once

// Command-line front end. Lives in a header so tests can drive it in-process.
// Failures print one line, "error: <kind>: <message>", and exit nonzero;
// usage errors exit 2.

#include <numeric>
#include <iostream>

#include "CLI11.hpp"
#include "featvid/external_codec.hpp"
#include "featvid/rate_distortion.hpp"
#include "featvid/server.hpp"

namespace featvid {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

inline nlohmann::json plan_to_json(const GroupPlan& plan, std::size_t theta, double gamma) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : plan.groups)
    groups.push_back({{"start_frame", g.start_frame},
                      {"end_frame", g.end_frame},
                      {"union_vertices", g.union_occupancy.occupied_count()}});
  return {{"theta", theta}, {"gamma", gamma}, {"groups", groups}};
}

namespace detail {

inline nlohmann::json read_json(const std::filesystem::path& p) {
  try {
    return nlohmann::json::parse(read_text(p));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format, p.string() + ": " + e.what());
  }
}

inline std::string volume_name(int t, const char* kind) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "frame_%04d.%s.vrfv", t, kind);
  return buf;
}

inline Layout parse_layout(const std::string& s) {
  if (s == "morton") return Layout::morton_block;
  if (s == "row-major") return Layout::row_major;
  fail(Errc::usage, "unknown layout " + s);
}

inline std::vector<CodecSettings> parse_q_list(const std::vector<std::string>& items) {
  std::vector<CodecSettings> out;
  for (const auto& s : items) {
    if (s == "lossless") {
      out.push_back({1, true});
      continue;
    }
    std::size_t used = 0;
    int q = 0;
    try {
      q = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || q < 1) fail(Errc::usage, "quantizer must be a positive integer or 'lossless', got '" + s + "'");
    out.push_back({q, false});
  }
  return out;
}

}  // namespace detail

/// Runs the CLI; `out` gets results, `err` gets progress and errors.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"featvid: bake, fit, encode, render and stream feature-image radiance fields"};
  app.require_subcommand(1);
  unsigned workers = default_workers();
  app.add_option("--workers", workers, "Worker threads")->check(CLI::Range(1u, 1024u));

  // shared scene/plan inputs
  struct SceneArgs {
    std::string scene;
    std::size_t theta = kDefaultTheta;
    double gamma = kDefaultGamma;
    std::string layout = "morton";
  };
  auto add_scene_args = [](CLI::App* sub, SceneArgs& a, bool required = true) {
    auto* o = sub->add_option("--scene", a.scene, "Scene JSON")->check(CLI::ExistingFile);
    if (required) o->required();
    sub->add_option("--theta", a.theta, "Vertex budget per group")->check(CLI::PositiveNumber);
    sub->add_option("--gamma", a.gamma, "Occupancy density threshold")->check(CLI::NonNegativeNumber);
    sub->add_option("--layout", a.layout, "Mapping layout")->check(CLI::IsMember({"morton", "row-major"}));
  };
  auto prepare = [](const SceneArgs& a) {
    return prepare_sequence(scene_from_json(detail::read_json(a.scene)), a.theta, a.gamma, detail::parse_layout(a.layout));
  };

  // synth
  auto* synth = app.add_subcommand("synth", "Write density and feature volumes for every frame of a scene");
  std::string synth_scene, synth_out;
  synth->add_option("--scene", synth_scene, "Scene JSON")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->callback([&] {
    const auto scene = scene_from_json(detail::read_json(synth_scene));
    scene.validate();
    for (int t = 0; t < scene.frame_count; ++t) {
      const auto f = generate_frame(scene, t);
      save_density(std::filesystem::path(synth_out) / detail::volume_name(t, "density"), f.density);
      save_features(std::filesystem::path(synth_out) / detail::volume_name(t, "features"), f.features);
    }
    write_text(std::filesystem::path(synth_out) / "scene.json", scene_to_json(scene).dump(2) + "\n");
    out << "wrote " << scene.frame_count << " frames to " << synth_out << "\n";
  });

  // plan
  auto* plan = app.add_subcommand("plan", "Group frames under the vertex budget");
  std::string plan_volumes, plan_scene, plan_out;
  std::size_t plan_theta = kDefaultTheta;
  double plan_gamma = kDefaultGamma;
  auto* pv = plan->add_option("--volumes", plan_volumes, "Directory written by synth")->check(CLI::ExistingDirectory);
  plan->add_option("--scene", plan_scene, "Scene JSON (instead of --volumes)")->check(CLI::ExistingFile)->excludes(pv);
  plan->add_option("--theta", plan_theta, "Vertex budget per group")->check(CLI::PositiveNumber);
  plan->add_option("--gamma", plan_gamma, "Occupancy density threshold")->check(CLI::NonNegativeNumber);
  plan->add_option("--out", plan_out, "Write the plan JSON here instead of stdout");
  plan->callback([&] {
    std::vector<OccupancyGrid> occ;
    if (!plan_volumes.empty()) {
      for (int t = 0;; ++t) {
        const auto p = std::filesystem::path(plan_volumes) / detail::volume_name(t, "density");
        if (!std::filesystem::exists(p)) break;
        occ.push_back(threshold_occupancy(load_density(p), plan_gamma));
      }
      if (occ.empty()) fail(Errc::load, "no density volumes in " + plan_volumes);
    } else if (!plan_scene.empty()) {
      const auto scene = scene_from_json(detail::read_json(plan_scene));
      scene.validate();
      for (int t = 0; t < scene.frame_count; ++t)
        occ.push_back(threshold_occupancy(generate_frame(scene, t).density, plan_gamma));
    } else {
      fail(Errc::usage, "plan needs --volumes or --scene");
    }
    const auto text = plan_to_json(plan_groups(occ, plan_theta), plan_theta, plan_gamma).dump(2) + "\n";
    if (plan_out.empty()) out << text;
    else write_text(plan_out, text);
  });

  // bake
  auto* bake_cmd = app.add_subcommand("bake", "Bundle ground-truth feature images (lossless by default)");
  SceneArgs bake_args;
  std::string bake_out, bake_q = "lossless";
  add_scene_args(bake_cmd, bake_args);
  bake_cmd->add_option("--out", bake_out, "Asset directory")->required();
  bake_cmd->add_option("--q", bake_q, "Quantizer, or 'lossless'");
  bake_cmd->callback([&] {
    const auto seq = prepare(bake_args);
    const auto frames = bake_sequence(seq);
    const auto mlp = reference_mlp();
    const auto settings = detail::parse_q_list({bake_q}).front();
    const auto m = bundle({&seq, &frames, &mlp, settings, std::filesystem::path(bake_args.scene).stem().string(),
                           Background::white},
                          bake_out, workers);
    out << "groups " << m.groups.size() << " total_bytes " << m.total_bytes << "\n";
  });

  // fit
  auto* fit = app.add_subcommand("fit", "Fit feature images and the decoder against reference renders");
  SceneArgs fit_args;
  std::string fit_config, fit_out, fit_assets, fit_q = "1";
  int fit_iterations = -1;
  add_scene_args(fit, fit_args);
  fit->add_option("--config", fit_config, "Fit config JSON")->check(CLI::ExistingFile);
  fit->add_option("--iterations", fit_iterations, "Override iterations per frame")->check(CLI::NonNegativeNumber);
  fit->add_option("--out", fit_out, "Checkpoint file (.vrfc)")->required();
  fit->add_option("--assets", fit_assets, "Also bundle the result here");
  fit->add_option("--q", fit_q, "Quantizer for --assets, or 'lossless'");
  fit->callback([&] {
    const auto seq = prepare(fit_args);
    FitConfig cfg = fit_config.empty() ? FitConfig{} : fit_config_from_json(detail::read_json(fit_config));
    if (fit_iterations >= 0) cfg.iterations = fit_iterations;
    cfg.workers = workers;
    FitObserver obs;
    obs.on_frame = [&](const FrameStats& st, const FeatureImage&) {
      err << "frame " << st.frame << " group " << st.group_id << " psnr " << st.train_psnr << "\n";
    };
    const auto result = fit_sequence(seq, cfg, obs);
    write_file(fit_out, encode_checkpoint(result));
    for (const auto& st : result.stats) out << "frame " << st.frame << " train_psnr " << st.train_psnr << "\n";
    if (!fit_assets.empty()) {
      const auto settings = detail::parse_q_list({fit_q}).front();
      bundle({&seq, &result.frames, &result.mlp, settings, std::filesystem::path(fit_args.scene).stem().string(),
              Background::white},
             fit_assets, workers);
    }
  });

  // encode
  auto* encode = app.add_subcommand("encode", "Quantizer sweep over a fitted checkpoint; CSV of rate and distortion");
  SceneArgs enc_args;
  std::string enc_ckpt, enc_out, enc_tool;
  std::vector<std::string> enc_q = {"lossless", "1", "2", "4", "8"};
  int enc_views = 4, enc_size = 64;
  add_scene_args(encode, enc_args);
  encode->add_option("--checkpoint", enc_ckpt, "Checkpoint from fit")->required()->check(CLI::ExistingFile);
  encode->add_option("--q", enc_q, "Quantizers ('lossless' allowed)")->delimiter(',');
  encode->add_option("--views", enc_views, "Held-out views")->check(CLI::PositiveNumber);
  encode->add_option("--size", enc_size, "Held-out view size")->check(CLI::PositiveNumber);
  encode->add_option("--out", enc_out, "Bundle each setting under <out>/q<q>");
  encode->add_option("--external", enc_tool, "External encoder JSON {encode, decode}; reported as an extra row");
  encode->callback([&] {
    const auto seq = prepare(enc_args);
    const auto fit = decode_checkpoint(read_file(enc_ckpt));
    if (int(fit.frames.size()) != seq.frame_count()) fail(Errc::shape, "checkpoint frame count does not match the scene");
    const auto settings = detail::parse_q_list(enc_q);
    std::vector<int> eval(std::size_t(seq.frame_count()));
    std::iota(eval.begin(), eval.end(), 0);
    const auto cams = heldout_cameras(enc_views, enc_size);
    const auto rd = rate_distortion(seq, fit.frames, fit.mlp, cams, settings, eval, workers);
    out << "q,bytes,bytes_per_frame,psnr_db\n";
    for (const auto& p : rd) out << settings_label(p.settings) << "," << p.bytes << "," << p.bytes_per_frame << "," << p.psnr << "\n";
    if (!enc_tool.empty()) {
      const auto tool = external_tool_from_json(detail::read_json(enc_tool));
      std::size_t bytes = 0;
      for (const auto& g : seq.groups) {
        std::vector<FeatureImage> group(fit.frames.begin() + g.frames.start_frame, fit.frames.begin() + g.frames.end_frame + 1);
        const auto prof = compute_profile(group);
        std::vector<QuantizedFrame> q;
        for (const auto& f : group) q.push_back(quantize(f, prof));
        const auto r = encode_gof_preferring(q, tool, {1, true}, prof);
        if (!r.external) err << "external encoder unavailable, used the built-in codec: " << r.fallback_reason << "\n";
        bytes += r.size_bytes();
      }
      out << "external," << bytes << "," << double(bytes) / double(seq.frame_count()) << ",\n";
    }
    if (!enc_out.empty())
      for (const auto& s : settings)
        bundle({&seq, &fit.frames, &fit.mlp, s, std::filesystem::path(enc_args.scene).stem().string(), Background::white},
               std::filesystem::path(enc_out) / ("q" + settings_label(s)), workers);
  });

  // render
  auto* render_cmd = app.add_subcommand("render", "Render one frame of a bundle to PNG");
  std::string r_assets, r_camera, r_out;
  int r_frame = 0;
  render_cmd->add_option("--assets", r_assets, "Asset directory")->required()->check(CLI::ExistingDirectory);
  render_cmd->add_option("--frame", r_frame, "Frame index")->required()->check(CLI::NonNegativeNumber);
  render_cmd->add_option("--camera", r_camera, "Camera JSON")->required()->check(CLI::ExistingFile);
  render_cmd->add_option("--out", r_out, "Output PNG")->required();
  render_cmd->callback([&] {
    const auto cam = camera_from_json(detail::read_json(r_camera));
    const auto img = render_bundle_frame(r_assets, r_frame, cam, workers);
    write_file(r_out, encode_png(to_png(img)));
    out << "wrote " << r_out << "\n";
  });

  // bench
  auto* bench = app.add_subcommand("bench", "Rate-distortion and A/B ablations; CSV on stdout");
  std::string b_ablate = "layout";
  std::string b_scene;
  int b_seeds = 3, b_iterations = 300, b_frames = 4, b_resolution = 32, b_q = 1;
  bench->add_option("--ablate", b_ablate, "Which comparison")->check(CLI::IsMember({"layout", "temporal", "spatial"}));
  bench->add_option("--scene", b_scene, "Scene JSON (default: translating sphere)")->check(CLI::ExistingFile);
  bench->add_option("--seeds", b_seeds, "Number of seeds")->check(CLI::PositiveNumber);
  bench->add_option("--iterations", b_iterations, "Fit iterations per frame (loss ablations)")->check(CLI::PositiveNumber);
  bench->add_option("--frames", b_frames, "Frames of the default scene")->check(CLI::PositiveNumber);
  bench->add_option("--resolution", b_resolution, "Grid resolution of the default scene")->check(CLI::Range(8, 512));
  bench->add_option("--q", b_q, "Quantizer")->check(CLI::PositiveNumber);
  bench->callback([&] {
    const CodecSettings s{b_q, false};
    if (b_ablate == "layout") out << "seed,morton_bytes,row_major_bytes\n";
    else out << "seed,lambda,keyframe_bytes,inter_bytes,train_psnr_db\n";
    for (int seed = 1; seed <= b_seeds; ++seed) {
      SyntheticScene scene = b_scene.empty() ? translating_sphere_scene(b_resolution, b_frames)
                                             : scene_from_json(detail::read_json(b_scene));
      scene.seed = std::uint64_t(seed);
      if (b_ablate == "layout") {
        const auto r = layout_ablation(scene, std::size_t(1) << 30, s, workers);
        out << seed << "," << r.morton_bytes << "," << r.row_major_bytes << "\n";
        continue;
      }
      const auto seq = prepare_sequence(scene, std::size_t(1) << 30);
      FitConfig cfg;
      cfg.iterations = b_iterations;
      cfg.rays_per_batch = 512;
      cfg.seed = std::uint64_t(seed);
      cfg.workers = workers;
      const auto which = b_ablate == "temporal" ? AblatedLoss::temporal : AblatedLoss::spatial;
      const double lambda = which == AblatedLoss::temporal ? LossWeights{}.lambda_t : LossWeights{}.lambda_s;
      const auto r = loss_ablation(seq, cfg, which, lambda, s);
      for (const auto* arm : {&r.with, &r.without})
        out << seed << "," << arm->lambda << "," << arm->keyframe_bytes << "," << arm->inter_bytes << ","
            << arm->mean_train_psnr << "\n";
    }
  });

  // serve
  auto* serve = app.add_subcommand("serve", "Serve a bundle over HTTP (read-only)");
  ServeConfig scfg;
  std::string s_root = ".";
  serve->add_option("--root", s_root, "Asset directory (env " + std::string(kAssetRootEnv) + " overrides)");
  serve->add_option("--host", scfg.host, "Bind address");
  serve->add_option("--port", scfg.port, "Port, 0 for any")->check(CLI::Range(0, 65535));
  serve->add_option("--cors-origin", scfg.cors_origin, "Access-Control-Allow-Origin value, empty to disable");
  serve->callback([&] {
    scfg.asset_root = s_root;
    scfg = apply_env_overrides(scfg);
    StreamServer server(scfg);
    const int port = server.bind();
    out << "serving " << scfg.asset_root.string() << " on http://" << scfg.host << ":" << port << "\n" << std::flush;
    server.run();
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << errc_name(e.code()) << ": " << e.what() << "\n";
    return e.code() == Errc::usage ? kExitUsage : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace featvid

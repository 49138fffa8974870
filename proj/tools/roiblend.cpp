// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command line front end: render, edit-train, blend-render, evaluate, serve
// and distill. Failures exit nonzero with {"error", "type"} JSON on stderr.

#include <charconv>
#include <csignal>
#include <fstream>
#include <iostream>
#include <string_view>

#include "CLI11.hpp"
#include "json.hpp"

#include "roiblend/checkpoint.hpp"
#include "roiblend/descriptors.hpp"
#include "roiblend/external_scorer.hpp"
#include "roiblend/image_io.hpp"
#include "roiblend/metrics.hpp"
#include "roiblend/service.hpp"

namespace {

using nlohmann::json;
using namespace roiblend;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json read_json_arg(const std::string& text) {
  try {
    if (!text.empty() && (text.front() == '{' || text.front() == '[')) return json::parse(text);
    std::ifstream in(text);
    if (!in) throw UsageError("cannot open " + text);
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("malformed JSON argument: " + std::string(e.what()));
  }
}

int parse_dimension(std::string_view text) {
  int v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || v <= 0) {
    throw UsageError("resolution must be N or WxH with positive integers");
  }
  return v;
}

Resolution parse_res(const std::string& text, Resolution fallback) {
  if (text.empty()) return fallback;
  const auto x = text.find('x');
  const std::string_view all(text);
  const int w = parse_dimension(all.substr(0, x));
  return {w, x == std::string::npos ? w : parse_dimension(all.substr(x + 1))};
}

std::vector<CameraPose> parse_poses(const std::string& text, const CameraPose& fallback) {
  if (text.empty()) return {fallback};
  const json j = read_json_arg(text);
  if (!j.is_array()) return {pose_from_json(j)};
  std::vector<CameraPose> poses;
  for (const json& p : j) poses.push_back(pose_from_json(p));
  if (poses.empty()) throw UsageError("pose list is empty");
  return poses;
}

struct ScorerOptions {
  std::string kind = "mock";
  std::string url;
  std::string target;
  int resolution = 32;
  std::uint64_t seed = 7;
};

void add_scorer_options(CLI::App* cmd, ScorerOptions& o) {
  cmd->add_option("--scorer", o.kind, "mock or external")->check(CLI::IsMember({"mock", "external"}));
  cmd->add_option("--scorer-url", o.url, "external scorer base url");
  cmd->add_option("--target", o.target, "mock scorer: PNG the caption embeds to");
  cmd->add_option("--scorer-res", o.resolution, "mock scorer input resolution");
  cmd->add_option("--scorer-seed", o.seed, "mock scorer projection seed");
}

std::unique_ptr<Scorer> make_scorer(const ScorerOptions& o, const std::string& caption) {
  if (o.kind == "external") {
    if (o.url.empty()) throw UsageError("--scorer external needs --scorer-url");
    return std::make_unique<HttpScorer>(o.url);
  }
  auto scorer = std::make_unique<MockScorer>(Resolution{o.resolution, o.resolution}, o.seed);
  if (!o.target.empty()) scorer->register_caption(caption, read_png_rgb(o.target));
  return scorer;
}

void write_render(const RenderOutput& out, const std::filesystem::path& png, bool sidecars) {
  write_png_rgb8(png, out.rgb);
  if (!sidecars) return;
  auto with = [&](const std::string& suffix) {
    std::filesystem::path p = png;
    p.replace_extension(suffix);
    return p;
  };
  write_f32_sidecar(with(".depth.f32"), occlusion_depth(out));
  write_f32_sidecar(with(".disparity.f32"), out.disparity);
}

std::filesystem::path frame_path(const std::filesystem::path& out, std::size_t i, std::size_t count) {
  if (count == 1) return out;
  char name[32];
  std::snprintf(name, sizeof(name), "frame_%03zu.png", i);
  return out / name;
}

EditService* g_service = nullptr;

void handle_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"roiblend: region-of-interest editing of radiance fields"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string res_text;

  // render
  auto* render = app.add_subcommand("render", "render the original scene");
  std::string scene_path, edit_path, pose_text, out_path;
  bool sidecars = false;
  render->add_option("scene", scene_path, "scene.json")->required();
  render->add_option("--pose", pose_text, "pose JSON, a pose list, or a file holding either");
  render->add_option("--res", res_text, "N or WxH");
  render->add_option("--out", out_path, "PNG path (a directory for pose lists)")->required();
  render->add_flag("--sidecars", sidecars, "also write depth/disparity f32 maps");

  // edit-train
  auto* train_cmd = app.add_subcommand("edit-train", "optimize a generator field inside the edit box");
  ScorerOptions scorer_opts;
  std::string out_dir = "edit_out", resume_path, train_json;
  int steps = -1;
  train_cmd->add_option("scene", scene_path, "scene.json")->required();
  train_cmd->add_option("edit", edit_path, "edit.json")->required();
  add_scorer_options(train_cmd, scorer_opts);
  train_cmd->add_option("--steps", steps, "training steps");
  train_cmd->add_option("--res", res_text, "training render resolution");
  train_cmd->add_option("--train", train_json, "JSON overrides (inline or file)");
  train_cmd->add_option("--out-dir", out_dir, "output directory");
  train_cmd->add_option("--resume", resume_path, "training state to resume from");

  // blend-render
  auto* blend = app.add_subcommand("blend-render", "render the edited scene");
  blend->add_option("scene", scene_path, "scene.json")->required();
  blend->add_option("edit", edit_path, "trained edit.json")->required();
  blend->add_option("--pose", pose_text, "pose JSON, a pose list, or a file holding either");
  blend->add_option("--res", res_text, "N or WxH");
  blend->add_option("--out", out_path, "PNG path (a directory for pose lists)")->required();
  blend->add_flag("--sidecars", sidecars, "also write depth/disparity f32 maps");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "score an edit over an orbit of frames");
  int frames = 6;
  double spacing = 10.0;
  std::string original_caption = "a scene", pool_path;
  eval->add_option("scene", scene_path, "scene.json")->required();
  eval->add_option("edit", edit_path, "trained edit.json")->required();
  add_scorer_options(eval, scorer_opts);
  eval->add_option("--frames", frames, "consecutive frames")->check(CLI::Range(2, 1000));
  eval->add_option("--spacing", spacing, "azimuth step between frames, degrees");
  eval->add_option("--res", res_text, "N or WxH");
  eval->add_option("--original-caption", original_caption, "caption of the unedited scene");
  eval->add_option("--pool", pool_path, "caption pool, one per line");

  // serve
  auto* serve = app.add_subcommand("serve", "start the HTTP service");
  std::string scenes_dir = "scenes", host = "127.0.0.1";
  int port = 8080;
  ServiceConfig service_cfg;
  serve->add_option("--scenes", scenes_dir, "directory searched for scene.json files");
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "port")->check(CLI::Range(0, 65535));
  serve->add_option("--work-dir", service_cfg.work_dir, "edit job outputs");
  serve->add_option("--max-res", service_cfg.max_resolution, "server-side resolution cap");

  // distill
  auto* distill = app.add_subcommand("distill", "bake a scene's field into an MLP checkpoint");
  DistillConfig distill_cfg;
  MlpArchitecture arch;
  distill->add_option("scene", scene_path, "scene.json")->required();
  distill->add_option("--out", out_path, "checkpoint path")->required();
  distill->add_option("--steps", distill_cfg.steps, "optimizer steps");
  distill->add_option("--batch", distill_cfg.batch, "points per step");
  distill->add_option("--lr", distill_cfg.lr, "learning rate");
  distill->add_option("--depth", arch.depth, "trunk layers");
  distill->add_option("--width", arch.width, "trunk width");
  distill->add_option("--pos-freq", arch.pos_frequencies, "position encoding frequencies");
  distill->add_option("--dir-freq", arch.dir_frequencies, "direction encoding frequencies");

  for (auto* cmd : {render, train_cmd, blend, eval, serve, distill}) {
    cmd->add_option("--seed", seed, "random seed")->each([&](const std::string&) { seed_given = true; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", e.what()}, {"type", "usage"}}.dump() << '\n';
    return 2;
  }

  try {
    if (render->parsed()) {
      const SceneDescriptor scene = load_scene(scene_path);
      const auto field = scene.load_field();
      const auto poses = parse_poses(pose_text, scene.default_camera);
      const Resolution res = parse_res(res_text, scene.render.resolution);
      if (poses.size() > 1) std::filesystem::create_directories(out_path);
      for (std::size_t i = 0; i < poses.size(); ++i) {
        write_render(render_scene(scene, *field, poses[i], res, seed), frame_path(out_path, i, poses.size()), sidecars);
      }
    } else if (train_cmd->parsed()) {
      const SceneDescriptor scene = load_scene(scene_path);
      const EditDescriptor edit = load_edit(edit_path);
      TrainConfig cfg = train_json.empty() ? TrainConfig{} : train_config_from_json(read_json_arg(train_json));
      if (steps >= 0) cfg.steps = steps;
      if (!res_text.empty()) cfg.resolution = parse_res(res_text, cfg.resolution);
      if (seed_given) cfg.seed = seed;
      const auto scorer = make_scorer(scorer_opts, edit.caption);
      TrainOptions options;
      if (!resume_path.empty()) options.resume = load_train_state(resume_path);
      const EditRunResult result = run_edit(scene, edit, cfg, *scorer, out_dir, std::move(options));
      json summary = {{"edit", result.edit_path.string()},
                      {"generator", result.generator_path.string()},
                      {"history", result.history_path.string()},
                      {"steps", result.state.step}};
      if (!result.state.history.empty()) {
        const LossRecord& last = result.state.history.back();
        summary["final"] = {{"l_sim", last.l_sim}, {"l_t", last.l_t}, {"l_d", last.l_d}, {"total", last.total}};
      }
      std::cout << summary.dump(2) << '\n';
    } else if (blend->parsed()) {
      const SceneDescriptor scene = load_scene(scene_path);
      const EditDescriptor edit = load_edit(edit_path);
      const EditedScene fields = load_edited_scene(scene, edit);
      const auto poses = parse_poses(pose_text, scene.default_camera);
      const Resolution res = parse_res(res_text, scene.render.resolution);
      if (poses.size() > 1) std::filesystem::create_directories(out_path);
      for (std::size_t i = 0; i < poses.size(); ++i) {
        write_render(render_edit(scene, edit, fields, poses[i], res, seed), frame_path(out_path, i, poses.size()),
                     sidecars);
      }
    } else if (eval->parsed()) {
      const SceneDescriptor scene = load_scene(scene_path);
      const EditDescriptor edit = load_edit(edit_path);
      const EditedScene fields = load_edited_scene(scene, edit);
      const auto scorer = make_scorer(scorer_opts, edit.caption);
      const Resolution res = parse_res(res_text, scene.render.resolution);
      const auto poses = orbit_poses(scene.default_camera, edit.box.center(), frames, spacing);
      std::vector<Image> original, edited;
      for (const CameraPose& pose : poses) {
        original.push_back(render_scene(scene, *fields.original, pose, res, seed).rgb);
        edited.push_back(render_edit(scene, edit, fields, pose, res, seed).rgb);
      }
      std::vector<std::string> pool{edit.caption};
      if (!pool_path.empty()) {
        std::ifstream in(pool_path);
        if (!in) throw UsageError("cannot open " + pool_path);
        for (std::string line; std::getline(in, line);) {
          if (!line.empty() && line != edit.caption) pool.push_back(line);
        }
      }
      json report;
      json warnings = json::array();
      auto attempt = [&](const char* key, auto&& fn) {
        try {
          report[key] = fn();
        } catch (const MetricError& e) {
          report[key] = nullptr;
          warnings.push_back(std::string(key) + ": " + e.what());
        }
      };
      attempt("direction_similarity", [&] {
        return direction_similarity(*scorer, original[0], edited[0], original_caption, edit.caption);
      });
      attempt("direction_consistency", [&] {
        const ConsistencyResult c = direction_consistency(*scorer, original, edited);
        if (c.pairs_excluded) warnings.push_back("direction_consistency: excluded " + std::to_string(c.pairs_excluded) + " degenerate pairs");
        return c.score;
      });
      attempt("r_precision", [&] {
        return r_precision(*scorer, edited, std::vector<std::string>(edited.size(), edit.caption), pool);
      });
      report["masked_bg_mad"] =
          masked_background_mad(original[0], edited[0], roi_pixel_mask(edit.box, poses[0], res));
      report["frames"] = frames;
      if (!warnings.empty()) report["warnings"] = warnings;
      std::cout << report.dump(2) << '\n';
    } else if (serve->parsed()) {
      EditService service(load_scene_directory(scenes_dir), service_cfg);
      g_service = &service;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      if (port == 0) {
        const int bound = service.bind_any_port(host);
        std::cout << json{{"host", host}, {"port", bound}}.dump() << std::endl;
        service.listen_after_bind();
      } else {
        std::cout << json{{"host", host}, {"port", port}}.dump() << std::endl;
        service.listen(host, port);
      }
      g_service = nullptr;
    } else if (distill->parsed()) {
      const SceneDescriptor scene = load_scene(scene_path);
      const auto source = scene.load_field();
      if (seed_given) distill_cfg.seed = seed;
      distill_cfg.activation = scene.render.sampling.activation;
      std::vector<double> losses;
      const MlpField field = distill_field(*source, scene.bounds_min, scene.bounds_max, arch, distill_cfg, &losses);
      save_field(out_path, field, {{"distilled_from", scene.id}, {"steps", distill_cfg.steps}});
      std::cout << json{{"out", out_path}, {"final_loss", losses.empty() ? 0.0 : losses.back()}}.dump() << '\n';
    }
  } catch (const UsageError& e) {
    std::cerr << json{{"error", e.what()}, {"type", "usage"}}.dump() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}, {"type", "runtime"}}.dump() << '\n';
    return 1;
  }
  return 0;
}

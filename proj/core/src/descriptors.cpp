// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#include "roiblend/descriptors.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "roiblend/checkpoint.hpp"

namespace roiblend {

using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DescriptorError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DescriptorError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DescriptorError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

// Runs `body`, turning parse and validation failures into DescriptorError.
template <typename F>
auto guarded(const char* what, F&& body) {
  try {
    return body();
  } catch (const json::exception& e) {
    throw DescriptorError(std::string(what) + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw DescriptorError(std::string(what) + ": " + e.what());
  }
}

Resolution resolution_from_json(const json& j) {
  if (j.is_number_integer()) return {j.get<int>(), j.get<int>()};
  if (j.is_array() && j.size() == 2) return {j[0].get<int>(), j[1].get<int>()};
  throw DescriptorError("resolution must be N or [width, height]");
}

json blend_to_json(const BlendMode& b) {
  return {{"mode", to_string(b.variant)}, {"alpha", b.alpha}, {"epsilon", b.epsilon}};
}

BlendMode blend_from_json(const json& j) {
  BlendMode b;
  b.variant = blend_variant_from_string(j.at("mode").get<std::string>());
  b.alpha = j.value("alpha", b.alpha);
  b.epsilon = j.value("epsilon", b.epsilon);
  b.validate();
  return b;
}

}  // namespace

json vec_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw DescriptorError("expected a 3-vector");
  const Vec3 v(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
  if (!v.allFinite()) throw DescriptorError("vector components must be finite");
  return v;
}

json pose_to_json(const CameraPose& pose) {
  return {{"position", vec_to_json(pose.position())},
          {"look_at", vec_to_json(pose.position() + pose.forward())},
          {"up", vec_to_json(pose.up())},
          {"afov_deg", pose.afov() / kDeg}};
}

CameraPose pose_from_json(const json& j) {
  return guarded("pose", [&] {
    const Vec3 up = j.contains("up") ? vec_from_json(j["up"]) : Vec3::UnitY();
    return CameraPose::look_at(vec_from_json(j.at("position")), vec_from_json(j.at("look_at")), up,
                               j.value("afov_deg", 60.0) * kDeg);
  });
}

json box_to_json(const RoiBox& box) { return {{"center", vec_to_json(box.center())}, {"dims", vec_to_json(box.dims())}}; }

RoiBox box_from_json(const json& j) {
  return guarded("box", [&] { return RoiBox(vec_from_json(j.at("center")), vec_from_json(j.at("dims"))); });
}

std::string to_string(SceneType type) { return type == SceneType::full_orbit ? "full-orbit" : "forward-facing"; }

SceneType scene_type_from_string(const std::string& name) {
  if (name == "full-orbit") return SceneType::full_orbit;
  if (name == "forward-facing") return SceneType::forward_facing;
  throw DescriptorError("unknown scene type: " + name);
}

std::unique_ptr<RadianceField> SceneDescriptor::load_field() const {
  try {
    if (!checkpoint.empty()) return roiblend::load_field(checkpoint);
    return field_from_descriptor(inline_field);
  } catch (const CheckpointError& e) {
    throw DescriptorError("scene '" + id + "': " + e.what());
  }
}

SceneDescriptor scene_from_json(const json& j, const std::filesystem::path& base_dir) {
  return guarded("scene", [&] {
    SceneDescriptor s;
    s.id = j.at("id").get<std::string>();
    if (s.id.empty()) throw DescriptorError("scene id must be nonempty");
    s.scene_type = scene_type_from_string(j.value("scene_type", std::string("full-orbit")));
    if (j.contains("checkpoint")) {
      s.checkpoint = resolve(base_dir, j["checkpoint"].get<std::string>());
    } else if (j.contains("field")) {
      s.inline_field = j["field"];
    } else {
      throw DescriptorError("scene needs a checkpoint or an inline field");
    }
    if (j.contains("bounds")) {
      s.bounds_min = vec_from_json(j["bounds"].at("min"));
      s.bounds_max = vec_from_json(j["bounds"].at("max"));
    }
    if (!(s.bounds_min.array() < s.bounds_max.array()).all()) throw DescriptorError("scene bounds are empty");
    if (j.contains("default_camera")) s.default_camera = pose_from_json(j["default_camera"]);
    if (j.contains("render")) {
      const json& r = j["render"];
      SamplingConfig& c = s.render.sampling;
      if (r.contains("resolution")) s.render.resolution = resolution_from_json(r["resolution"]);
      c.samples = r.value("samples", c.samples);
      c.roi_samples = r.value("roi_samples", c.roi_samples);
      c.stratified = r.value("stratified", c.stratified);
      c.near = r.value("near", c.near);
      c.far = r.value("far", c.far);
      if (r.contains("activation")) c.activation = density_activation_from_string(r["activation"].get<std::string>());
      if (r.contains("background")) s.render.background = background_kind_from_string(r["background"].get<std::string>());
      c.validate();
    }
    return s;
  });
}

SceneDescriptor load_scene(const std::filesystem::path& path) {
  SceneDescriptor s = scene_from_json(read_json_file(path), path.parent_path());
  if (!s.checkpoint.empty() && !std::filesystem::exists(s.checkpoint)) {
    throw DescriptorError("scene checkpoint not found: " + s.checkpoint.string());
  }
  return s;
}

json scene_to_json(const SceneDescriptor& s) {
  json j = {{"id", s.id},
            {"scene_type", to_string(s.scene_type)},
            {"bounds", {{"min", vec_to_json(s.bounds_min)}, {"max", vec_to_json(s.bounds_max)}}},
            {"default_camera", pose_to_json(s.default_camera)},
            {"render",
             {{"resolution", {s.render.resolution.width, s.render.resolution.height}},
              {"samples", s.render.sampling.samples},
              {"roi_samples", s.render.sampling.roi_samples},
              {"stratified", s.render.sampling.stratified},
              {"near", s.render.sampling.near},
              {"far", s.render.sampling.far},
              {"activation", to_string(s.render.sampling.activation)},
              {"background", to_string(s.render.background)}}}};
  if (!s.checkpoint.empty()) {
    j["checkpoint"] = s.checkpoint.string();
  } else {
    j["field"] = s.inline_field;
  }
  return j;
}

void EditDescriptor::validate(const SceneDescriptor* scene) const {
  blend.validate();
  if (caption.empty()) throw DescriptorError("edit caption must be nonempty");
  if (scene) {
    if (!scene_id.empty() && scene_id != scene->id) {
      throw DescriptorError("edit targets scene '" + scene_id + "', not '" + scene->id + "'");
    }
    constexpr double tol = 1e-9;
    if ((box.min_corner().array() < scene->bounds_min.array() - tol).any() ||
        (box.max_corner().array() > scene->bounds_max.array() + tol).any()) {
      throw DescriptorError("edit box lies outside the scene bounds");
    }
  }
  if (center && !box.contains(*center, 1e-9)) throw DescriptorError("edit center lies outside the box");
}

EditDescriptor edit_from_json(const json& j, const std::filesystem::path& base_dir) {
  return guarded("edit", [&] {
    EditDescriptor e;
    e.id = j.value("id", std::string());
    e.scene_id = j.value("scene_id", std::string());
    e.box = box_from_json(j.at("box"));
    if (j.contains("blend")) e.blend = blend_from_json(j["blend"]);
    e.caption = j.at("caption").get<std::string>();
    e.texture_only = j.value("texture_only", false);
    if (j.contains("center") && !j["center"].is_null()) e.center = vec_from_json(j["center"]);
    if (j.contains("generator_checkpoint")) {
      e.generator_checkpoint = resolve(base_dir, j["generator_checkpoint"].get<std::string>());
    }
    e.validate();
    return e;
  });
}

EditDescriptor load_edit(const std::filesystem::path& path) {
  return edit_from_json(read_json_file(path), path.parent_path());
}

json edit_to_json(const EditDescriptor& e) {
  json j = {{"id", e.id},
            {"scene_id", e.scene_id},
            {"box", box_to_json(e.box)},
            {"blend", blend_to_json(e.blend)},
            {"caption", e.caption},
            {"texture_only", e.texture_only}};
  if (e.center) j["center"] = vec_to_json(*e.center);
  if (!e.generator_checkpoint.empty()) j["generator_checkpoint"] = e.generator_checkpoint.string();
  return j;
}

void save_edit(const std::filesystem::path& path, const EditDescriptor& edit) { write_json_file(path, edit_to_json(edit)); }

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  if (j.is_null()) return c;
  if (!j.is_object()) throw DescriptorError("train overrides must be an object");
  guarded("train", [&] {
    for (const auto& [key, v] : j.items()) {
      if (key == "steps") c.steps = v.get<int>();
      else if (key == "lr") c.adam.lr = v.get<double>();
      else if (key == "lr_final") c.adam.lr_final = v.get<double>();
      else if (key == "clip_norm") c.adam.clip_norm = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "resolution") c.resolution = resolution_from_json(v);
      else if (key == "samples") c.sampling.samples = v.get<int>();
      else if (key == "roi_samples") c.sampling.roi_samples = v.get<int>();
      else if (key == "stratified") c.sampling.stratified = v.get<bool>();
      else if (key == "activation") c.sampling.activation = density_activation_from_string(v.get<std::string>());
      else if (key == "tau") c.loss.tau = v.get<double>();
      else if (key == "rho") c.loss.rho = v.get<double>();
      else if (key == "lambda_t") c.loss.lambda_t = v.get<double>();
      else if (key == "lambda_d") c.loss.lambda_d = v.get<double>();
      else if (key == "ramp_start") c.loss.ramp_start = v.get<double>();
      else if (key == "ramp_end") c.loss.ramp_end = v.get<double>();
      else if (key == "afov_deg") c.afov = v.get<double>() * kDeg;
      else if (key == "min_near") c.min_near = v.get<double>();
      else if (key == "recenter_probability") c.pose.recenter_probability = v.get<double>();
      else if (key == "radius_jitter") c.pose.radius_jitter = v.get<double>();
      else if (key == "azimuth_deg") c.pose.azimuth_min_deg = v.at(0).get<double>(), c.pose.azimuth_max_deg = v.at(1).get<double>();
      else if (key == "elevation_deg") c.pose.elevation_min_deg = v.at(0).get<double>(), c.pose.elevation_max_deg = v.at(1).get<double>();
      else if (key == "checkpoint_every") c.checkpoint_every = v.get<int>();
      else if (key == "ema_decay") c.ema_decay = v.get<double>();
      else if (key == "backgrounds") {
        c.backgrounds.clear();
        for (const json& b : v) c.backgrounds.push_back(background_kind_from_string(b.get<std::string>()));
      } else if (key == "generator") {
        c.generator_arch.depth = v.value("depth", c.generator_arch.depth);
        c.generator_arch.width = v.value("width", c.generator_arch.width);
        c.generator_arch.pos_frequencies = v.value("pos_frequencies", c.generator_arch.pos_frequencies);
        c.generator_arch.dir_frequencies = v.value("dir_frequencies", c.generator_arch.dir_frequencies);
      } else {
        throw DescriptorError("unknown training option: " + key);
      }
    }
    c.validate();
    return 0;
  });
  return c;
}

json train_config_to_json(const TrainConfig& c) {
  json backgrounds = json::array();
  for (BackgroundKind b : c.backgrounds) backgrounds.push_back(to_string(b));
  return {{"steps", c.steps},
          {"lr", c.adam.lr},
          {"lr_final", c.adam.lr_final},
          {"clip_norm", c.adam.clip_norm},
          {"seed", c.seed},
          {"resolution", {c.resolution.width, c.resolution.height}},
          {"samples", c.sampling.samples},
          {"roi_samples", c.sampling.roi_samples},
          {"stratified", c.sampling.stratified},
          {"activation", to_string(c.sampling.activation)},
          {"tau", c.loss.tau},
          {"rho", c.loss.rho},
          {"lambda_t", c.loss.lambda_t},
          {"lambda_d", c.loss.lambda_d},
          {"ramp_start", c.loss.ramp_start},
          {"ramp_end", c.loss.ramp_end},
          {"afov_deg", c.afov / kDeg},
          {"min_near", c.min_near},
          {"recenter_probability", c.pose.recenter_probability},
          {"radius_jitter", c.pose.radius_jitter},
          {"azimuth_deg", {c.pose.azimuth_min_deg, c.pose.azimuth_max_deg}},
          {"elevation_deg", {c.pose.elevation_min_deg, c.pose.elevation_max_deg}},
          {"checkpoint_every", c.checkpoint_every},
          {"ema_decay", c.ema_decay},
          {"backgrounds", backgrounds},
          {"generator",
           {{"depth", c.generator_arch.depth},
            {"width", c.generator_arch.width},
            {"pos_frequencies", c.generator_arch.pos_frequencies},
            {"dir_frequencies", c.generator_arch.dir_frequencies}}}};
}

EditRunResult run_edit(const SceneDescriptor& scene, const EditDescriptor& edit, const TrainConfig& base,
                       const Scorer& scorer, const std::filesystem::path& out_dir, TrainOptions options) {
  edit.validate(&scene);
  TrainConfig cfg = base;
  cfg.blend = edit.blend;
  cfg.texture_only = edit.texture_only;
  cfg.scene_type = scene.scene_type;
  cfg.pose.scene_type = scene.scene_type;
  const std::unique_ptr<RadianceField> original = scene.load_field();
  std::filesystem::create_directories(out_dir);
  if (options.state_path.empty()) options.state_path = out_dir / "train_state.rbs";

  TrainState state = train(*original, edit.box, edit.caption, cfg, scorer, std::move(options));

  EditRunResult result{edit, std::move(state), out_dir / "generator.rbf", out_dir / "edit.json",
                       out_dir / "loss_history.csv"};
  if (result.edit.scene_id.empty()) result.edit.scene_id = scene.id;
  result.edit.center = result.state.tracker.center_or(edit.box.center());
  save_field(result.generator_path, result.state.generator,
             {{"edit", result.edit.id}, {"steps", result.state.step}, {"train", train_config_to_json(cfg)}});
  EditDescriptor on_disk = result.edit;
  on_disk.generator_checkpoint = "generator.rbf";
  save_edit(result.edit_path, on_disk);
  result.edit.generator_checkpoint = result.generator_path;
  write_loss_history_csv(result.history_path, result.state.history);
  return result;
}

EditedScene load_edited_scene(const SceneDescriptor& scene, const EditDescriptor& edit) {
  if (edit.generator_checkpoint.empty()) throw DescriptorError("edit has no generator checkpoint");
  EditedScene fields;
  fields.original = scene.load_field();
  try {
    fields.generated = load_field(edit.generator_checkpoint);
  } catch (const CheckpointError& e) {
    throw DescriptorError(std::string("edit generator: ") + e.what());
  }
  return fields;
}

namespace {

SamplingConfig scene_sampling(const SceneDescriptor& scene, std::uint64_t seed) {
  SamplingConfig cfg = scene.render.sampling;
  cfg.seed = seed;
  return cfg;
}

Image scene_background(const SceneDescriptor& scene, Resolution res, std::uint64_t seed) {
  BackgroundSpec spec;
  spec.kind = scene.render.background;
  spec.seed = seed;
  return make_background(spec, res);
}

}  // namespace

RenderOutput render_scene(const SceneDescriptor& scene, const RadianceField& field, const CameraPose& pose,
                          Resolution res, std::uint64_t seed) {
  return render_view(field, pose, res, scene_sampling(scene, seed), scene_background(scene, res, seed));
}

RenderOutput render_edit(const SceneDescriptor& scene, const EditDescriptor& edit, const EditedScene& fields,
                         const CameraPose& pose, Resolution res, std::uint64_t seed) {
  return render_blended(*fields.original, *fields.generated, edit.box, edit.blend, edit.blend_center(), pose, res,
                        scene_sampling(scene, seed), scene_background(scene, res, seed));
}

std::vector<CameraPose> orbit_poses(const CameraPose& start, const Vec3& target, int count, double spacing_deg) {
  if (count < 1) throw InvalidArgument("orbit_poses: count must be >= 1");
  const Vec3 offset = start.position() - target;
  const double r = offset.norm();
  if (!(r > 0.0)) throw InvalidArgument("orbit_poses: camera sits on the target");
  const double azimuth = std::atan2(offset.x(), offset.z()) / kDeg;
  const double elevation = -std::asin(std::clamp(offset.y() / r, -1.0, 1.0)) / kDeg;
  std::vector<CameraPose> poses;
  for (int i = 0; i < count; ++i) {
    const Vec3 position = target + r * orbit_direction(azimuth + i * spacing_deg, elevation);
    poses.push_back(CameraPose::look_at(position, target, Vec3::UnitY(), start.afov()));
  }
  return poses;
}

}  // namespace roiblend

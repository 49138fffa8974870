// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"

#include "roiblend/background.hpp"
#include "roiblend/blending.hpp"
#include "roiblend/geometry.hpp"
#include "roiblend/renderer.hpp"
#include "roiblend/trainer.hpp"

namespace roiblend {

class DescriptorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Camera on the wire: {"position": [x,y,z], "look_at": [x,y,z], "up": [x,y,z], "afov_deg": a}.
nlohmann::json pose_to_json(const CameraPose& pose);
CameraPose pose_from_json(const nlohmann::json& j);

// {"center": [...], "dims": [...]}
nlohmann::json box_to_json(const RoiBox& box);
RoiBox box_from_json(const nlohmann::json& j);

nlohmann::json vec_to_json(const Vec3& v);
Vec3 vec_from_json(const nlohmann::json& j);

std::string to_string(SceneType type);
SceneType scene_type_from_string(const std::string& name);

struct RenderDefaults {
  Resolution resolution{168, 168};
  SamplingConfig sampling;
  BackgroundKind background = BackgroundKind::black;
};

struct SceneDescriptor {
  std::string id;
  SceneType scene_type = SceneType::full_orbit;
  std::filesystem::path checkpoint;  // resolved; empty for inline analytic fields
  nlohmann::json inline_field;       // analytic descriptor when no checkpoint
  Vec3 bounds_min = Vec3::Constant(-1.0);
  Vec3 bounds_max = Vec3::Constant(1.0);
  CameraPose default_camera = CameraPose::look_at(Vec3(0, 0, 4), Vec3::Zero(), Vec3::UnitY(), 1.0471975511965976);
  RenderDefaults render;

  std::unique_ptr<RadianceField> load_field() const;
};

// Relative checkpoint paths resolve against the descriptor's directory.
SceneDescriptor load_scene(const std::filesystem::path& path);
SceneDescriptor scene_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
nlohmann::json scene_to_json(const SceneDescriptor& scene);

struct EditDescriptor {
  std::string id;
  std::string scene_id;
  RoiBox box{Vec3::Zero(), Vec3::Ones()};
  BlendMode blend;
  std::string caption;
  bool texture_only = false;
  std::optional<Vec3> center;              // frozen EMA center after training
  std::filesystem::path generator_checkpoint;

  void validate(const SceneDescriptor* scene = nullptr) const;
  Vec3 blend_center() const { return center.value_or(box.center()); }
};

EditDescriptor load_edit(const std::filesystem::path& path);
EditDescriptor edit_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
nlohmann::json edit_to_json(const EditDescriptor& edit);
void save_edit(const std::filesystem::path& path, const EditDescriptor& edit);

// Applies overrides such as {"steps": 500, "lr": 1e-3, "resolution": 32} on
// top of defaults.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
nlohmann::json train_config_to_json(const TrainConfig& cfg);

struct EditRunResult {
  EditDescriptor edit;  // with center and generator checkpoint filled in
  TrainState state;
  std::filesystem::path generator_path;
  std::filesystem::path edit_path;
  std::filesystem::path history_path;
};

// Trains the generator and writes generator.rbf, edit.json and
// loss_history.csv under out_dir.
EditRunResult run_edit(const SceneDescriptor& scene, const EditDescriptor& edit, const TrainConfig& cfg,
                       const Scorer& scorer, const std::filesystem::path& out_dir, TrainOptions options = {});

struct EditedScene {
  std::unique_ptr<RadianceField> original;
  std::unique_ptr<RadianceField> generated;
};

EditedScene load_edited_scene(const SceneDescriptor& scene, const EditDescriptor& edit);

RenderOutput render_scene(const SceneDescriptor& scene, const RadianceField& field, const CameraPose& pose,
                          Resolution res, std::uint64_t seed);
RenderOutput render_edit(const SceneDescriptor& scene, const EditDescriptor& edit, const EditedScene& fields,
                         const CameraPose& pose, Resolution res, std::uint64_t seed);

// Orbit of `count` poses around `target` stepping azimuth by spacing_deg.
std::vector<CameraPose> orbit_poses(const CameraPose& start, const Vec3& target, int count, double spacing_deg);

}  // namespace roiblend

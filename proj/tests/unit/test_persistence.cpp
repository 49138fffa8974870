// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>

#include "doctest.h"
#include "support.hpp"

#include "roiblend/checkpoint.hpp"
#include "roiblend/descriptors.hpp"
#include "roiblend/image_io.hpp"

using namespace roiblend;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

MlpArchitecture small_arch() {
  MlpArchitecture a;
  a.depth = 2;
  a.width = 16;
  a.pos_frequencies = 3;
  a.dir_frequencies = 1;
  return a;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("roiblend_persistence_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::pair<Eigen::Matrix3Xd, Eigen::Matrix3Xd> probes(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Eigen::Matrix3Xd p(3, n);
  Eigen::Matrix3Xd d(3, n);
  for (int i = 0; i < n; ++i) {
    p.col(i) = Vec3(u(rng), u(rng), u(rng));
    d.col(i) = testing::random_unit(rng);
  }
  return {p, d};
}

void check_bitwise_equal_eval(const RadianceField& a, const RadianceField& b) {
  const auto [p, d] = probes(500, 3);
  const FieldBatch x = a.eval(p, d);
  const FieldBatch y = b.eval(p, d);
  CHECK(x.raw_density == y.raw_density);
  CHECK(x.raw_color == y.raw_color);
}

std::uint32_t read_u32(const std::vector<std::uint8_t>& bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | bytes[at + static_cast<std::size_t>(i)];
  return v;
}

}  // namespace

TEST_CASE("MLP checkpoint round trip is bitwise and follows the documented layout") {
  const MlpField field = MlpField::initialize(small_arch(), 17);
  const nlohmann::json meta = {{"note", "probe"}, {"steps", 3}};
  const std::vector<std::uint8_t> bytes = encode_field(field, meta);

  REQUIRE(bytes.size() > 24);
  CHECK(std::memcmp(bytes.data(), "RBFIELD\0", 8) == 0);
  CHECK(read_u32(bytes, 8) == kCheckpointVersion);
  const std::uint32_t header = read_u32(bytes, 12);
  const auto header_json = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + header);
  CHECK(header_json.contains("architecture"));
  std::uint64_t count = 0;
  std::memcpy(&count, bytes.data() + 16 + header, 8);
  CHECK(count == static_cast<std::uint64_t>(field.param_count()));
  CHECK(bytes.size() == 24 + header + 4 * count);

  nlohmann::json meta_back;
  const auto decoded = decode_field(bytes, &meta_back);
  CHECK(meta_back == meta);
  const auto* mlp = dynamic_cast<const MlpField*>(decoded.get());
  REQUIRE(mlp != nullptr);
  CHECK(mlp->architecture() == field.architecture());
  CHECK(mlp->params() == field.params());
  CHECK(mlp->checksum() == field.checksum());
  check_bitwise_equal_eval(field, *decoded);

  // Encoding is deterministic.
  CHECK(encode_field(field, meta) == bytes);
  CHECK(encode_field(*decoded, meta) == bytes);
}

TEST_CASE("analytic checkpoint round trip") {
  const AnalyticField table = testing::checker_table();
  const auto decoded = decode_field(encode_field(table));
  check_bitwise_equal_eval(table, *decoded);
  CHECK(field_descriptor(*decoded) == field_descriptor(table));

  const auto from_desc = field_from_descriptor(field_descriptor(table));
  check_bitwise_equal_eval(table, *from_desc);

  const AnalyticField ball = AnalyticField::uniform_sphere(Vec3(0.1, 0.2, 0.3), 0.7, 8.0, Vec3(0.5, -0.5, 1.0));
  check_bitwise_equal_eval(ball, *decode_field(encode_field(ball)));

  const fs::path dir = scratch_dir("analytic");
  save_field(dir / "table.rbf", table, {{"k", 1}});
  nlohmann::json meta;
  check_bitwise_equal_eval(table, *load_field(dir / "table.rbf", &meta));
  CHECK(meta["k"] == 1);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const MlpField field = MlpField::initialize(small_arch(), 2);
  const std::vector<std::uint8_t> good = encode_field(field);

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_field(bad_magic), CheckpointError);

  auto bad_version = good;
  bad_version[8] = 2;
  CHECK_THROWS_AS(decode_field(bad_version), CheckpointError);

  for (std::size_t cut : {std::size_t{0}, std::size_t{7}, std::size_t{15}, std::size_t{40}, good.size() - 1}) {
    CHECK_THROWS_AS(decode_field(std::vector<std::uint8_t>(good.begin(), good.begin() + cut)), CheckpointError);
  }
  auto trailing = good;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_field(trailing), CheckpointError);

  auto bad_json = good;
  bad_json[16] = '!';
  CHECK_THROWS_AS(decode_field(bad_json), CheckpointError);

  CHECK_THROWS_AS(load_field("/nonexistent/roiblend/field.rbf"), CheckpointError);
  CHECK_THROWS_AS(field_from_descriptor(field_descriptor(field)), CheckpointError);
  CHECK_THROWS_AS(field_from_descriptor({{"kind", "analytic"}, {"type", "torus"}}), CheckpointError);

  // A training-state file is not a field checkpoint.
  const fs::path dir = scratch_dir("corrupt");
  TrainConfig cfg;
  cfg.generator_arch = small_arch();
  save_train_state(dir / "state.rbs", init_train_state(testing::checker_table(), cfg));
  CHECK_THROWS_AS(load_field(dir / "state.rbs"), CheckpointError);
  save_field(dir / "field.rbf", field);
  CHECK_THROWS_AS(load_train_state(dir / "field.rbf"), CheckpointError);
}

TEST_CASE("training state round trip") {
  TrainConfig cfg;
  cfg.steps = 3;
  cfg.resolution = {12, 12};
  cfg.sampling.roi_samples = 16;
  cfg.generator_arch = small_arch();
  MockScorer scorer({12, 12}, 7);
  scorer.register_caption("a red disc", testing::red_disc({12, 12}));
  const TrainState state =
      train(testing::checker_table(), testing::example_box(), "a red disc", cfg, scorer);

  const fs::path dir = scratch_dir("state");
  save_train_state(dir / "s.rbs", state);
  const TrainState back = load_train_state(dir / "s.rbs");
  CHECK(back.step == state.step);
  CHECK(back.generator.params() == state.generator.params());
  CHECK(back.moments.m == state.moments.m);
  CHECK(back.moments.v == state.moments.v);
  CHECK(back.tracker.initialized() == state.tracker.initialized());
  CHECK(back.tracker.center_or(Vec3::Zero()) == state.tracker.center_or(Vec3::Zero()));
  REQUIRE(back.history.size() == state.history.size());
  for (std::size_t i = 0; i < state.history.size(); ++i) {
    CHECK(back.history[i].step == state.history[i].step);
    CHECK(back.history[i].total == state.history[i].total);
    CHECK(back.history[i].l_sim == state.history[i].l_sim);
  }

  auto bytes = read_file_bytes(dir / "s.rbs");
  bytes.resize(bytes.size() - 4);
  write_file_bytes(dir / "short.rbs", bytes);
  CHECK_THROWS_AS(load_train_state(dir / "short.rbs"), CheckpointError);
}

TEST_CASE("PNG encoding") {
  Image img({7, 5}, 3);
  Rng rng(4);
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  for (double& v : img.data()) v = u(rng);
  const auto png = encode_png_rgb8(img);
  CHECK(png == encode_png_rgb8(img));
  const Image back = decode_png_rgb(png);
  REQUIRE(back.resolution() == img.resolution());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double expected = std::round(std::clamp(img.data()[i], 0.0, 1.0) * 255.0) / 255.0;
    CHECK(back.data()[i] == Approx(expected).epsilon(1e-12));
  }

  Image depth({4, 2}, 1);
  for (std::size_t i = 0; i < depth.size(); ++i) depth.data()[i] = 0.5 * static_cast<double>(i);
  depth.data()[7] = std::numeric_limits<double>::infinity();
  const Image gray = decode_png_rgb(encode_png_gray16(depth, 2.0));
  REQUIRE(gray.resolution() == depth.resolution());
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const double v = depth.data()[i];
    const double expected = std::isfinite(v) ? std::round(65535.0 * std::clamp(v / 2.0, 0.0, 1.0)) / 65535.0 : 1.0;
    const int x = static_cast<int>(i % 4);
    const int y = static_cast<int>(i / 4);
    for (int c = 0; c < 3; ++c) CHECK(gray(x, y, c) == Approx(expected).epsilon(1e-12));
  }

  CHECK_THROWS_AS(decode_png_rgb({1, 2, 3, 4}), ImageIoError);
  CHECK_THROWS_AS(encode_png_rgb8(depth), ImageIoError);
}

TEST_CASE("f32 sidecar") {
  Image map({3, 2}, 1);
  for (std::size_t i = 0; i < map.size(); ++i) map.data()[i] = 0.1 * static_cast<double>(i) + 1.0;
  const auto bytes = encode_f32_sidecar(map);
  REQUIRE(bytes.size() == 4 * map.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    float f = 0.0F;
    std::memcpy(&f, bytes.data() + 4 * i, 4);
    CHECK(f == static_cast<float>(map.data()[i]));
  }
}

TEST_CASE("base64") {
  const auto as_bytes = [](const std::string& s) { return std::vector<std::uint8_t>(s.begin(), s.end()); };
  CHECK(base64_encode({}).empty());
  CHECK(base64_encode(as_bytes("f")) == "Zg==");
  CHECK(base64_encode(as_bytes("fo")) == "Zm8=");
  CHECK(base64_encode(as_bytes("foobar")) == "Zm9vYmFy");
  Rng rng(6);
  std::uniform_int_distribution<int> byte(0, 255);
  for (std::size_t n = 0; n < 40; ++n) {
    std::vector<std::uint8_t> data(n);
    for (auto& b : data) b = static_cast<std::uint8_t>(byte(rng));
    CHECK(base64_decode(base64_encode(data)) == data);
  }
  CHECK_THROWS_AS(base64_decode("Zm9"), ImageIoError);
  CHECK_THROWS_AS(base64_decode("Zm9v!mFy"), ImageIoError);
}

TEST_CASE("bundled scene and edit descriptors") {
  const fs::path scene_dir = fs::path(ROIBLEND_SCENES_DIR) / "checker_table";
  const SceneDescriptor scene = load_scene(scene_dir / "scene.json");
  CHECK(scene.id == "checker_table");
  CHECK(scene.scene_type == SceneType::full_orbit);
  CHECK(scene.render.resolution == Resolution{64, 64});
  CHECK(scene.render.background == BackgroundKind::white);
  check_bitwise_equal_eval(*scene.load_field(), testing::checker_table());

  const SceneDescriptor again = scene_from_json(scene_to_json(scene), scene_dir);
  CHECK(scene_to_json(again) == scene_to_json(scene));

  const EditDescriptor edit = load_edit(scene_dir / "edit.json");
  CHECK(edit.scene_id == "checker_table");
  CHECK(edit.box.center() == Vec3(0.0, 0.5, 0.0));
  CHECK(edit.blend.variant == BlendVariant::replace);
  CHECK_NOTHROW(edit.validate(&scene));
  CHECK(edit_to_json(edit_from_json(edit_to_json(edit), scene_dir)) == edit_to_json(edit));

  EditDescriptor outside = edit;
  outside.box = RoiBox(Vec3(0.0, 0.0, 1.9), Vec3(1.0, 1.0, 1.0));
  CHECK_THROWS_AS(outside.validate(&scene), DescriptorError);
  EditDescriptor other_scene = edit;
  other_scene.scene_id = "elsewhere";
  CHECK_THROWS_AS(other_scene.validate(&scene), DescriptorError);
  EditDescriptor no_caption = edit;
  no_caption.caption.clear();
  CHECK_THROWS_AS(no_caption.validate(), DescriptorError);
  EditDescriptor far_center = edit;
  far_center.center = Vec3(5.0, 0.0, 0.0);
  CHECK_THROWS_AS(far_center.validate(), DescriptorError);

  nlohmann::json bad_box = edit_to_json(edit);
  bad_box["box"]["dims"] = {1.0, 0.0, 1.0};
  CHECK_THROWS_AS(edit_from_json(bad_box, scene_dir), DescriptorError);
  nlohmann::json bad_mode = edit_to_json(edit);
  bad_mode["blend"]["mode"] = "melt";
  CHECK_THROWS_AS(edit_from_json(bad_mode, scene_dir), DescriptorError);
  CHECK_THROWS_AS(load_scene(scene_dir / "missing.json"), DescriptorError);
}

TEST_CASE("scene checkpoints resolve relative to the descriptor") {
  const fs::path dir = scratch_dir("relative");
  fs::create_directories(dir / "nested");
  const MlpField field = MlpField::initialize(small_arch(), 5);
  save_field(dir / "nested" / "field.rbf", field);
  nlohmann::json j = scene_to_json(load_scene(fs::path(ROIBLEND_SCENES_DIR) / "checker_table" / "scene.json"));
  j.erase("field");
  j["checkpoint"] = "nested/field.rbf";
  std::ofstream(dir / "scene.json") << j.dump();
  const SceneDescriptor scene = load_scene(dir / "scene.json");
  CHECK(scene.checkpoint == dir / "nested" / "field.rbf");
  check_bitwise_equal_eval(*scene.load_field(), field);
}

TEST_CASE("pose and box JSON") {
  const CameraPose pose = testing::default_camera();
  const CameraPose back = pose_from_json(pose_to_json(pose));
  CHECK((back.position() - pose.position()).norm() < 1e-12);
  CHECK(back.afov() == Approx(pose.afov()).epsilon(1e-12));
  const Ray a = pose.pixel_ray(3, 4, {10, 10}, 0.0, 1.0);
  const Ray b = back.pixel_ray(3, 4, {10, 10}, 0.0, 1.0);
  CHECK((a.direction() - b.direction()).norm() < 1e-12);

  const RoiBox box = testing::example_box();
  const RoiBox box_back = box_from_json(box_to_json(box));
  CHECK(box_back.center() == box.center());
  CHECK(box_back.dims() == box.dims());
  CHECK_THROWS_AS(pose_from_json({{"position", {0, 0, 1}}}), DescriptorError);
  CHECK_THROWS_AS(pose_from_json(
                      {{"position", {0, 0, 1}}, {"look_at", {0, 0, 1}}, {"up", {0, 1, 0}}, {"afov_deg", 60.0}}),
                  DescriptorError);
  CHECK_THROWS_AS(vec_from_json({1.0, 2.0}), DescriptorError);
}

TEST_CASE("training overrides") {
  const TrainConfig c = train_config_from_json(
      {{"steps", 42}, {"lr", 1e-3}, {"resolution", 32}, {"backgrounds", {"white"}}, {"generator", {{"width", 24}}}});
  CHECK(c.steps == 42);
  CHECK(c.adam.lr == 1e-3);
  CHECK(c.resolution == Resolution{32, 32});
  REQUIRE(c.backgrounds.size() == 1);
  CHECK(c.backgrounds[0] == BackgroundKind::white);
  CHECK(c.generator_arch.width == 24);
  CHECK(c.generator_arch.depth == TrainConfig{}.generator_arch.depth);

  const TrainConfig round = train_config_from_json(train_config_to_json(c));
  CHECK(train_config_to_json(round) == train_config_to_json(c));
  CHECK_THROWS_AS(train_config_from_json({{"stepz", 1}}), DescriptorError);
  CHECK_THROWS_AS(train_config_from_json({{"steps", "many"}}), DescriptorError);
  CHECK_THROWS_AS(train_config_from_json(nlohmann::json::array()), DescriptorError);
}

TEST_CASE("run_edit writes generator, edit and loss history") {
  const fs::path scene_dir = fs::path(ROIBLEND_SCENES_DIR) / "checker_table";
  const SceneDescriptor scene = load_scene(scene_dir / "scene.json");
  const EditDescriptor edit = load_edit(scene_dir / "edit.json");
  TrainConfig cfg;
  cfg.steps = 2;
  cfg.resolution = {12, 12};
  cfg.sampling.roi_samples = 16;
  cfg.generator_arch = small_arch();
  MockScorer scorer({12, 12}, 7);
  const fs::path out = scratch_dir("run_edit");
  const EditRunResult result = run_edit(scene, edit, cfg, scorer, out);

  CHECK(fs::exists(out / "generator.rbf"));
  CHECK(fs::exists(out / "edit.json"));
  CHECK(fs::exists(out / "loss_history.csv"));
  CHECK(result.state.step == 2);
  CHECK(result.edit.center.has_value());
  CHECK(edit.box.contains(*result.edit.center, 1e-9));

  const EditDescriptor saved = load_edit(out / "edit.json");
  CHECK(saved.generator_checkpoint == out / "generator.rbf");
  const EditedScene fields = load_edited_scene(scene, saved);
  check_bitwise_equal_eval(*fields.generated, result.state.generator);

  std::ifstream csv(out / "loss_history.csv");
  std::string line;
  int lines = 0;
  while (std::getline(csv, line)) ++lines;
  CHECK(lines == 3);

  const RenderOutput a = render_edit(scene, saved, fields, scene.default_camera, {16, 16}, 1);
  const RenderOutput b = render_edit(scene, saved, fields, scene.default_camera, {16, 16}, 1);
  CHECK(a.rgb == b.rgb);

  EditDescriptor missing = saved;
  missing.generator_checkpoint.clear();
  CHECK_THROWS_AS(load_edited_scene(scene, missing), DescriptorError);
}

TEST_CASE("orbit_poses keeps radius and elevation") {
  const CameraPose start = testing::default_camera();
  const Vec3 target(0.0, 0.5, 0.0);
  const auto poses = orbit_poses(start, target, 6, 10.0);
  REQUIRE(poses.size() == 6);
  CHECK((poses[0].position() - start.position()).norm() < 1e-9);
  const double r = (start.position() - target).norm();
  for (std::size_t i = 0; i < poses.size(); ++i) {
    CHECK((poses[i].position() - target).norm() == Approx(r).epsilon(1e-12));
    CHECK(poses[i].position().y() == Approx(start.position().y()).epsilon(1e-12));
    if (i > 0) {
      const Vec3 u = poses[i - 1].position() - target;
      const Vec3 v = poses[i].position() - target;
      const double ang = std::abs(std::atan2(u.z() * v.x() - u.x() * v.z(), u.x() * v.x() + u.z() * v.z()));
      CHECK(ang == Approx(10.0 * std::numbers::pi / 180.0).epsilon(1e-9));
    }
  }
  CHECK_THROWS_AS(orbit_poses(start, target, 0, 10.0), InvalidArgument);
  CHECK_THROWS_AS(orbit_poses(start, start.position(), 3, 10.0), InvalidArgument);
}

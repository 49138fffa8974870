// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "support.hpp"

#include "roiblend/geometry.hpp"

using namespace roiblend;
using doctest::Approx;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
const RoiBox kUnitBox(Vec3::Zero(), Vec3(2.0, 2.0, 2.0));

Vec3 permute(const Vec3& v, const std::array<int, 3>& p) { return {v[p[0]], v[p[1]], v[p[2]]}; }

}  // namespace

TEST_CASE("RoiBox rejects degenerate dims and contains its center") {
  CHECK_THROWS_AS(RoiBox(Vec3::Zero(), Vec3(1.0, 0.0, 1.0)), InvalidArgument);
  CHECK_THROWS_AS(RoiBox(Vec3::Zero(), Vec3(1.0, -1.0, 1.0)), InvalidArgument);
  const RoiBox box(Vec3(1.0, 2.0, 3.0), Vec3(0.5, 1.0, 2.0));
  CHECK(box.contains(box.center()));
  CHECK(box.diagonal() == Approx(std::sqrt(0.25 + 1.0 + 4.0)));
  CHECK(box.max_extent() == 2.0);
}

TEST_CASE("Ray validates direction and range") {
  CHECK_THROWS_AS(Ray(Vec3::Zero(), Vec3(1.0, 1.0, 0.0), 0.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(Ray(Vec3::Zero(), Vec3::UnitX(), 2.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(Ray(Vec3::Zero(), Vec3::UnitX(), -1.0, 1.0), InvalidArgument);
  CHECK_NOTHROW(Ray(Vec3::Zero(), Vec3::UnitX(), 0.0, 1.0));
}

TEST_CASE("ray_box_intersect worked examples") {
  const auto hit = ray_box_intersect(Ray(Vec3(0, 0, 5), Vec3(0, 0, -1), 0.0, 100.0), kUnitBox);
  REQUIRE(hit);
  CHECK(hit->enter == Approx(4.0));
  CHECK(hit->exit == Approx(6.0));

  CHECK_FALSE(ray_box_intersect(Ray(Vec3(5, 5, 5), Vec3(0, 0, -1), 0.0, 100.0), kUnitBox));

  const auto inside = ray_box_intersect(Ray(Vec3::Zero(), Vec3(1, 0, 0), 0.0, 100.0), kUnitBox);
  REQUIRE(inside);
  CHECK(inside->enter == 0.0);
  CHECK(inside->exit == Approx(1.0));
}

TEST_CASE("ray_box_intersect clamps to the ray range and rejects measure-zero overlap") {
  const auto clipped = ray_box_intersect(Ray(Vec3(0, 0, 5), Vec3(0, 0, -1), 4.5, 5.5), kUnitBox);
  REQUIRE(clipped);
  CHECK(clipped->enter == 4.5);
  CHECK(clipped->exit == 5.5);
  CHECK_FALSE(ray_box_intersect(Ray(Vec3(0, 0, 5), Vec3(0, 0, -1), 0.0, 4.0), kUnitBox));
  // Touching a single edge point.
  CHECK_FALSE(ray_box_intersect(Ray(Vec3(0, 2, 0), Vec3(1, -1, 0).normalized(), 0.0, 100.0), kUnitBox));
}

TEST_CASE("ray_box_intersect agrees with a dense membership scan") {
  Rng rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  constexpr double step = 1e-3;
  int checked = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const Vec3 origin(u(rng), u(rng), u(rng));
    const Vec3 dir = testing::random_unit(rng);
    const Ray ray(origin, dir, 0.0, 8.0);
    const auto hit = ray_box_intersect(ray, kUnitBox);
    double first = -1.0;
    double last = -1.0;
    for (double t = 0.0; t <= 8.0; t += step) {
      if (kUnitBox.contains(ray.at(t))) {
        if (first < 0.0) first = t;
        last = t;
      }
    }
    if (first < 0.0) {
      // A miss, or a sliver thinner than the scan step.
      if (hit) CHECK(hit->length() < 2.0 * step);
      continue;
    }
    REQUIRE(hit);
    CHECK(std::abs(hit->enter - first) <= step);
    CHECK(std::abs(hit->exit - last) <= step);
    ++checked;
  }
  CHECK(checked > 1000);
}

TEST_CASE("ray_box_intersect midpoint lies inside and is symmetric under axis permutation") {
  Rng rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> d(0.2, 1.5);
  std::array<int, 3> perm{0, 1, 2};
  for (int trial = 0; trial < 2000; ++trial) {
    const RoiBox box(Vec3(u(rng), u(rng), u(rng)) * 0.3, Vec3(d(rng), d(rng), d(rng)));
    const Ray ray(Vec3(u(rng), u(rng), u(rng)) * 2.0, testing::random_unit(rng), 0.0, 20.0);
    const auto hit = ray_box_intersect(ray, box);
    if (hit) CHECK(box.contains(ray.at(0.5 * (hit->enter + hit->exit)), 1e-12));
    std::next_permutation(perm.begin(), perm.end());
    const auto permuted = ray_box_intersect(Ray(permute(ray.origin(), perm), permute(ray.direction(), perm), 0.0, 20.0),
                                            RoiBox(permute(box.center(), perm), permute(box.dims(), perm)));
    REQUIRE(hit.has_value() == permuted.has_value());
    if (hit) {
      CHECK(permuted->enter == Approx(hit->enter).epsilon(1e-12));
      CHECK(permuted->exit == Approx(hit->exit).epsilon(1e-12));
    }
  }
}

TEST_CASE("camera_distance worked examples and properties") {
  CHECK(camera_distance(90 * kDeg, 2.0) == Approx(1.0));
  CHECK(camera_distance(90 * kDeg, 4.0) == Approx(2.0));
  // Independent evaluation: 1 / (2 tan 30deg) = sqrt(3) / 2.
  CHECK(camera_distance(60 * kDeg, 1.0) == Approx(std::sqrt(3.0) / 2.0).epsilon(1e-12));
  CHECK(camera_distance(60 * kDeg, 1.0) == Approx(0.8660).epsilon(1e-4));
  CHECK_THROWS_AS(camera_distance(std::numbers::pi, 1.0), InvalidArgument);
  CHECK_THROWS_AS(camera_distance(0.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(camera_distance(1.0, 0.0), InvalidArgument);
  double previous = std::numeric_limits<double>::infinity();
  for (double a = 5.0; a < 180.0; a += 5.0) {
    const double d = camera_distance(a * kDeg, 3.0);
    CHECK(d < previous);
    previous = d;
    CHECK(std::abs(std::tan(0.5 * a * kDeg) * d - 1.5) < 1e-12);
  }
}

TEST_CASE("near_far_planes worked examples and coverage") {
  const NearFar a = near_far_planes(10.0, 4.0);
  CHECK(a.near == 8.0);
  CHECK(a.far == 14.0);
  const NearFar b = near_far_planes(1.0, 4.0, 0.01);
  CHECK(b.near == 0.01);
  CHECK(b.far == 5.0);
  const NearFar c = near_far_planes(2.0, 4.0, 0.01);
  CHECK(c.near == 0.01);
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.01, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const double d = u(rng);
    const double diag = u(rng);
    const NearFar p = near_far_planes(d, diag, 0.01);
    CHECK(p.near < p.far);
    CHECK(p.far - p.near >= diag - 1e-12);
    CHECK(p.near <= std::max(0.01, d - diag / 2));
    CHECK(p.far >= d + diag / 2);
  }
}

TEST_CASE("CameraPose frame and projection round trip") {
  const CameraPose pose = testing::default_camera();
  CHECK(std::abs(pose.forward().dot(pose.up())) < 1e-9);
  CHECK(std::abs(pose.forward().dot(pose.right())) < 1e-9);
  const Resolution res{40, 30};
  for (int y = 0; y < res.height; y += 7) {
    for (int x = 0; x < res.width; x += 5) {
      const Ray ray = pose.pixel_ray(x, y, res, 0.0, 10.0);
      const auto px = pose.project(ray.at(3.0), res);
      REQUIRE(px);
      CHECK(px->x() == Approx(x + 0.5));
      CHECK(px->y() == Approx(y + 0.5));
    }
  }
  CHECK_THROWS_AS(CameraPose(Vec3::Zero(), Vec3::UnitZ(), Vec3::UnitZ(), 1.0), InvalidArgument);
  CHECK_THROWS_AS(CameraPose(Vec3::Zero(), Vec3::UnitZ(), Vec3::UnitY(), std::numbers::pi), InvalidArgument);
}

TEST_CASE("sample_pose stays within the configured ranges") {
  PoseSamplingConfig cfg;
  const RoiBox box = testing::example_box();
  const double afov = 60 * kDeg;
  const double d = camera_distance(afov, box.max_extent());
  Rng rng(123);
  for (int i = 0; i < 10000; ++i) {
    const SampledPose s = sample_pose(cfg, box, afov, box.center(), rng);
    const ViewAngles a = view_angles(s.pose);
    CHECK(a.azimuth_deg >= -180.0 - 1e-9);
    CHECK(a.azimuth_deg <= 180.0 + 1e-9);
    CHECK(a.elevation_deg >= -90.0 - 1e-6);
    CHECK(a.elevation_deg <= 15.0 + 1e-6);
    CHECK(s.radius >= d * (1 - cfg.radius_jitter) - 1e-12);
    CHECK(s.radius <= d * (1 + cfg.radius_jitter) + 1e-12);
    CHECK(box.contains(s.look_target, 1e-12));
    CHECK((s.pose.position() + s.radius * s.pose.forward() - s.look_target).norm() < 1e-9);
  }
}

TEST_CASE("sample_pose is deterministic and p = 0 never recenters") {
  PoseSamplingConfig cfg;
  cfg.recenter_probability = 0.0;
  const RoiBox box = testing::example_box();
  const Vec3 com(0.1, 0.4, -0.2);
  Rng a(9), b(9);
  for (int i = 0; i < 500; ++i) {
    const SampledPose pa = sample_pose(cfg, box, 1.0, com, a);
    const SampledPose pb = sample_pose(cfg, box, 1.0, com, b);
    CHECK(pa.pose.position() == pb.pose.position());
    CHECK(pa.pose.forward() == pb.pose.forward());
    CHECK(pa.look_target == com);
  }
  cfg.recenter_probability = 1.0;
  Rng c(9);
  CHECK(sample_pose(cfg, box, 1.0, com, c).look_target != com);
}

TEST_CASE("forward-facing poses trace the spiral in front of the target") {
  PoseSamplingConfig cfg;
  cfg.scene_type = SceneType::forward_facing;
  cfg.recenter_probability = 0.0;
  const RoiBox box = testing::example_box();
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const SampledPose s = sample_pose(cfg, box, 1.0, box.center(), rng);
    const Vec3 offset = s.pose.position() - box.center();
    CHECK(offset.z() > 0.0);
    CHECK(std::abs(offset.x()) <= cfg.spiral_radii.x() + 1e-12);
    CHECK(std::abs(offset.y()) <= cfg.spiral_radii.y() + 1e-12);
    CHECK((s.pose.position() + s.radius * s.pose.forward() - box.center()).norm() < 1e-9);
  }
}

TEST_CASE("PoseSamplingConfig validation") {
  PoseSamplingConfig cfg;
  cfg.recenter_probability = 1.5;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.elevation_min_deg = 20.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.azimuth_max_deg = 200.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("project_box_edges visibility cases") {
  const CameraPose pose = testing::default_camera();
  const RoiBox box = testing::example_box();
  const Resolution res{64, 48};

  const Image far_depth(res, 1, 1e6);
  const auto near = project_box_edges(box, pose, far_depth, 16);
  REQUIRE_FALSE(near.empty());
  for (const EdgeSample& s : near) CHECK(s.visible);

  const Image zero_depth(res, 1, 0.0);
  for (const EdgeSample& s : project_box_edges(box, pose, zero_depth, 16)) CHECK_FALSE(s.visible);

  const RoiBox behind(pose.position() - 3.0 * pose.forward(), Vec3(0.5, 0.5, 0.5));
  CHECK(project_box_edges(behind, pose, far_depth, 16).empty());

  CHECK_THROWS_AS(project_box_edges(box, pose, far_depth, 1), InvalidArgument);
}

TEST_CASE("project_box_edges with infinite depth equals frustum containment") {
  const CameraPose pose = CameraPose::look_at(Vec3(0.3, 0.8, 1.6), Vec3(0, 0.4, 0), Vec3::UnitY(), 50 * kDeg);
  const RoiBox box = testing::example_box();
  const Resolution res{32, 32};
  const Image inf_depth(res, 1, std::numeric_limits<double>::infinity());
  constexpr int n = 20;
  const auto samples = project_box_edges(box, pose, inf_depth, n);
  std::size_t expected = 0;
  int edge = 0;
  for (int a = 0; a < 8; ++a) {
    for (int axis = 0; axis < 3; ++axis) {
      if (a & (1 << axis)) continue;
      for (int s = 0; s < n; ++s) {
        const Vec3 p = box.corner(a) + (box.corner(a | (1 << axis)) - box.corner(a)) * (double(s) / (n - 1));
        const Vec3 c = pose.to_camera(p);
        if (c.z() <= 0.0) continue;
        const double t = std::tan(0.5 * pose.afov());
        if (std::abs(c.x() / c.z()) < t && std::abs(c.y() / c.z()) < t) ++expected;
      }
      ++edge;
    }
  }
  CHECK(edge == 12);
  CHECK(samples.size() == expected);
  for (const EdgeSample& s : samples) CHECK(s.visible);
}

TEST_CASE("project_box_edges samples 12 edges") {
  const CameraPose pose = CameraPose::look_at(Vec3(0, 0.5, 6), Vec3(0, 0.5, 0), Vec3::UnitY(), 60 * kDeg);
  const Image depth(Resolution{64, 64}, 1, 1e6);
  const auto samples = project_box_edges(testing::example_box(), pose, depth, 8);
  CHECK(samples.size() == 12 * 8);
  std::array<int, 12> per_edge{};
  for (const EdgeSample& s : samples) ++per_edge[s.edge];
  for (int c : per_edge) CHECK(c == 8);
}

// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#include "roiblend/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Geometry>

namespace roiblend {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

bool finite(const Vec3& v) { return v.allFinite(); }

}  // namespace

RoiBox::RoiBox(const Vec3& center, const Vec3& dims) : center_(center), dims_(dims) {
  if (!finite(center) || !finite(dims)) throw InvalidArgument("RoiBox: non-finite center or dims");
  if ((dims.array() <= 0.0).any()) throw InvalidArgument("RoiBox: dims must be positive");
}

bool RoiBox::contains(const Vec3& p, double tolerance) const {
  const Vec3 half = 0.5 * dims_;
  return ((p - center_).cwiseAbs().array() <= half.array() + tolerance).all();
}

Vec3 RoiBox::corner(int index) const {
  const Vec3 lo = min_corner();
  const Vec3 hi = max_corner();
  return {(index & 1) ? hi.x() : lo.x(), (index & 2) ? hi.y() : lo.y(), (index & 4) ? hi.z() : lo.z()};
}

Vec3 RoiBox::sample_uniform(Rng& rng) const {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  Vec3 p;
  for (int k = 0; k < 3; ++k) p[k] = center_[k] + u(rng) * dims_[k];
  return p;
}

Vec3 RoiBox::clamp(const Vec3& p) const { return p.cwiseMax(min_corner()).cwiseMin(max_corner()); }

Ray::Ray(const Vec3& origin, const Vec3& direction, double t_near, double t_far)
    : origin_(origin), direction_(direction), t_near_(t_near), t_far_(t_far) {
  if (!finite(origin) || !finite(direction)) throw InvalidArgument("Ray: non-finite origin or direction");
  if (std::abs(direction.norm() - 1.0) > 1e-9) throw InvalidArgument("Ray: direction must be unit length");
  if (!(t_near >= 0.0) || !(t_near < t_far)) throw InvalidArgument("Ray: need 0 <= t_near < t_far");
}

CameraPose::CameraPose(const Vec3& position, const Vec3& forward, const Vec3& up, double afov)
    : position_(position), forward_(forward), up_(up), right_(forward.cross(up)), afov_(afov) {
  if (!finite(position) || !finite(forward) || !finite(up)) throw InvalidArgument("CameraPose: non-finite input");
  if (!(afov > 0.0 && afov < std::numbers::pi)) throw InvalidArgument("CameraPose: afov must be in (0, pi)");
  constexpr double tol = 1e-9;
  if (std::abs(forward.norm() - 1.0) > tol || std::abs(up.norm() - 1.0) > tol || std::abs(forward.dot(up)) > tol) {
    throw InvalidArgument("CameraPose: forward/up must be orthonormal");
  }
}

CameraPose CameraPose::look_at(const Vec3& position, const Vec3& target, const Vec3& up_hint, double afov) {
  const Vec3 offset = target - position;
  if (!(offset.norm() > 0.0)) throw InvalidArgument("look_at: target coincides with position");
  const Vec3 forward = offset.normalized();
  Vec3 right = forward.cross(up_hint);
  if (right.norm() < 1e-9) {
    // Looking along the hint: any perpendicular works.
    right = forward.cross(std::abs(forward.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitZ());
  }
  right.normalize();
  const Vec3 up = right.cross(forward).normalized();
  return CameraPose(position, forward, up, afov);
}

Vec3 CameraPose::pixel_direction(double px, double py, Resolution res) const {
  const double tan_half = std::tan(0.5 * afov_);
  const double aspect = static_cast<double>(res.height) / res.width;
  const double u = (2.0 * px / res.width - 1.0) * tan_half;
  const double v = (1.0 - 2.0 * py / res.height) * tan_half * aspect;
  return (forward_ + u * right_ + v * up_).normalized();
}

Ray CameraPose::pixel_ray(int x, int y, Resolution res, double t_near, double t_far) const {
  return Ray(position_, pixel_direction(x + 0.5, y + 0.5, res), t_near, t_far);
}

Vec3 CameraPose::to_camera(const Vec3& p) const {
  const Vec3 d = p - position_;
  return {d.dot(right_), d.dot(up_), d.dot(forward_)};
}

std::optional<Vec2> CameraPose::project(const Vec3& p, Resolution res) const {
  const Vec3 c = to_camera(p);
  if (c.z() <= 1e-12) return std::nullopt;
  const double tan_half = std::tan(0.5 * afov_);
  const double aspect = static_cast<double>(res.height) / res.width;
  const double u = c.x() / c.z() / tan_half;
  const double v = c.y() / c.z() / (tan_half * aspect);
  return Vec2(0.5 * (u + 1.0) * res.width, 0.5 * (1.0 - v) * res.height);
}

ViewAngles view_angles(const CameraPose& pose) {
  const Vec3 offset = -pose.forward();
  return {std::atan2(offset.x(), offset.z()) / kDeg, -std::asin(std::clamp(offset.y(), -1.0, 1.0)) / kDeg};
}

Vec3 orbit_direction(double azimuth_deg, double elevation_deg) {
  const double az = azimuth_deg * kDeg;
  const double el = elevation_deg * kDeg;
  return {std::cos(el) * std::sin(az), -std::sin(el), std::cos(el) * std::cos(az)};
}

std::optional<Interval> ray_box_intersect(const Ray& ray, const RoiBox& box) {
  const Vec3 lo = box.min_corner();
  const Vec3 hi = box.max_corner();
  double enter = ray.t_near();
  double exit = ray.t_far();
  for (int k = 0; k < 3; ++k) {
    const double o = ray.origin()[k];
    const double d = ray.direction()[k];
    if (d == 0.0) {
      if (o < lo[k] || o > hi[k]) return std::nullopt;
      continue;
    }
    double t0 = (lo[k] - o) / d;
    double t1 = (hi[k] - o) / d;
    if (t0 > t1) std::swap(t0, t1);
    enter = std::max(enter, t0);
    exit = std::min(exit, t1);
  }
  if (!(enter < exit)) return std::nullopt;
  return Interval{enter, exit};
}

double camera_distance(double afov, double e_max) {
  if (!(afov > 0.0 && afov < std::numbers::pi)) throw InvalidArgument("camera_distance: afov must be in (0, pi)");
  if (!(e_max > 0.0)) throw InvalidArgument("camera_distance: e_max must be positive");
  return e_max / (2.0 * std::tan(0.5 * afov));
}

NearFar near_far_planes(double distance, double box_diag, double min_near) {
  if (!(distance > 0.0) || !(box_diag > 0.0)) throw InvalidArgument("near_far_planes: need d > 0 and diag > 0");
  return {std::max(min_near, distance - 0.5 * box_diag), distance + box_diag};
}

void PoseSamplingConfig::validate() const {
  auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
  if (!(azimuth_min_deg <= azimuth_max_deg) || !in(azimuth_min_deg, -180, 180) || !in(azimuth_max_deg, -180, 180)) {
    throw InvalidArgument("PoseSamplingConfig: azimuth range must be nonempty within [-180, 180]");
  }
  if (!(elevation_min_deg <= elevation_max_deg) || !in(elevation_min_deg, -90, 90) ||
      !in(elevation_max_deg, -90, 90)) {
    throw InvalidArgument("PoseSamplingConfig: elevation range must be nonempty within [-90, 90]");
  }
  if (!in(recenter_probability, 0.0, 1.0)) throw InvalidArgument("PoseSamplingConfig: p must be in [0, 1]");
  if (!in(radius_jitter, 0.0, 0.999)) throw InvalidArgument("PoseSamplingConfig: radius jitter must be in [0, 1)");
}

SampledPose sample_pose(const PoseSamplingConfig& cfg, const RoiBox& box, double afov, const Vec3& center_of_mass,
                        Rng& rng) {
  cfg.validate();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double d = camera_distance(afov, box.max_extent());

  const double u_azimuth = unit(rng);
  const double u_elevation = unit(rng);
  const double u_radius = unit(rng);
  const double u_recenter = unit(rng);
  Vec3 target = center_of_mass;
  if (u_recenter < cfg.recenter_probability) target = box.sample_uniform(rng);

  const double radius = d * (1.0 - cfg.radius_jitter + 2.0 * cfg.radius_jitter * u_radius);

  if (cfg.scene_type == SceneType::forward_facing) {
    const double t = 4.0 * std::numbers::pi * u_azimuth;
    const Vec3& r = cfg.spiral_radii;
    const Vec3 position =
        target + Vec3(0.0, 0.0, radius) + Vec3(r.x() * std::cos(t), r.y() * std::sin(t), r.z() * std::sin(0.5 * t));
    return {CameraPose::look_at(position, target, Vec3::UnitY(), afov), target, (position - target).norm()};
  }

  const double azimuth = cfg.azimuth_min_deg + (cfg.azimuth_max_deg - cfg.azimuth_min_deg) * u_azimuth;
  const double elevation = cfg.elevation_min_deg + (cfg.elevation_max_deg - cfg.elevation_min_deg) * u_elevation;
  const Vec3 offset = orbit_direction(azimuth, elevation);
  const Vec3 forward = -offset;
  const double az = azimuth * kDeg;
  const Vec3 right(std::cos(az), 0.0, -std::sin(az));
  const Vec3 up = right.cross(forward).normalized();
  return {CameraPose(target + radius * offset, forward, up, afov), target, radius};
}

std::vector<EdgeSample> project_box_edges(const RoiBox& box, const CameraPose& pose, const Image& depth_map,
                                          int samples_per_edge) {
  if (samples_per_edge < 2) throw InvalidArgument("project_box_edges: need at least 2 samples per edge");
  const Resolution res = depth_map.resolution();
  if (res.width <= 0 || res.height <= 0) throw InvalidArgument("project_box_edges: empty depth map");

  std::vector<EdgeSample> out;
  int edge = 0;
  for (int a = 0; a < 8; ++a) {
    for (int axis = 0; axis < 3; ++axis) {
      if (a & (1 << axis)) continue;
      const Vec3 p0 = box.corner(a);
      const Vec3 p1 = box.corner(a | (1 << axis));
      for (int s = 0; s < samples_per_edge; ++s) {
        const Vec3 p = p0 + (p1 - p0) * (static_cast<double>(s) / (samples_per_edge - 1));
        const auto pixel = pose.project(p, res);
        if (!pixel) continue;
        const double px = pixel->x();
        const double py = pixel->y();
        if (!(px >= 0.0 && px < res.width && py >= 0.0 && py < res.height)) continue;
        const double scene_depth = depth_map(static_cast<int>(px), static_cast<int>(py));
        const double camera_depth = (p - pose.position()).norm();
        const bool visible = std::isinf(scene_depth) || std::isnan(scene_depth) ||
                             camera_depth <= scene_depth * (1.0 + kOcclusionRelativeTolerance);
        out.push_back({edge, *pixel, visible});
      }
      ++edge;
    }
  }
  return out;
}

}  // namespace roiblend

// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "roiblend/common.hpp"
#include "roiblend/image.hpp"

namespace roiblend {

// Axis-aligned edit region.
class RoiBox {
 public:
  RoiBox(const Vec3& center, const Vec3& dims);

  const Vec3& center() const { return center_; }
  const Vec3& dims() const { return dims_; }
  Vec3 min_corner() const { return center_ - 0.5 * dims_; }
  Vec3 max_corner() const { return center_ + 0.5 * dims_; }
  double diagonal() const { return dims_.norm(); }
  double max_extent() const { return dims_.maxCoeff(); }

  bool contains(const Vec3& p, double tolerance = 0.0) const;
  Vec3 corner(int index) const;  // bit k of index selects max along axis k
  Vec3 sample_uniform(Rng& rng) const;
  Vec3 clamp(const Vec3& p) const;

  bool operator==(const RoiBox&) const = default;

 private:
  Vec3 center_;
  Vec3 dims_;
};

class Ray {
 public:
  Ray(const Vec3& origin, const Vec3& direction, double t_near, double t_far);

  const Vec3& origin() const { return origin_; }
  const Vec3& direction() const { return direction_; }
  double t_near() const { return t_near_; }
  double t_far() const { return t_far_; }
  Vec3 at(double t) const { return origin_ + t * direction_; }

 private:
  Vec3 origin_;
  Vec3 direction_;
  double t_near_;
  double t_far_;
};

struct Interval {
  double enter = 0.0;
  double exit = 0.0;
  double length() const { return exit - enter; }
};

// Pinhole camera. `afov` is the full angular field of view across the image
// width; pixels are square.
class CameraPose {
 public:
  CameraPose(const Vec3& position, const Vec3& forward, const Vec3& up, double afov);

  static CameraPose look_at(const Vec3& position, const Vec3& target, const Vec3& up_hint, double afov);

  const Vec3& position() const { return position_; }
  const Vec3& forward() const { return forward_; }
  const Vec3& up() const { return up_; }
  const Vec3& right() const { return right_; }
  double afov() const { return afov_; }

  // Ray through the center of pixel (x, y); y grows downward.
  Ray pixel_ray(int x, int y, Resolution res, double t_near, double t_far) const;
  Vec3 pixel_direction(double px, double py, Resolution res) const;

  // Camera-frame coordinates (right, up, forward) of a world point.
  Vec3 to_camera(const Vec3& p) const;

  // Continuous pixel coordinates (column, row) of a world point in front of
  // the camera; none when the point is at or behind the image plane.
  std::optional<Vec2> project(const Vec3& p, Resolution res) const;

 private:
  Vec3 position_;
  Vec3 forward_;
  Vec3 up_;
  Vec3 right_;
  double afov_;
};

// Azimuth around +y measured from +z, and elevation where negative values
// place the camera above the target.
struct ViewAngles {
  double azimuth_deg = 0.0;
  double elevation_deg = 0.0;
};

ViewAngles view_angles(const CameraPose& pose);

// Unit offset from a look-target to a camera at the given angles.
Vec3 orbit_direction(double azimuth_deg, double elevation_deg);

std::optional<Interval> ray_box_intersect(const Ray& ray, const RoiBox& box);

// Distance at which an extent e_max fills the angular field of view.
double camera_distance(double afov, double e_max);

struct NearFar {
  double near = 0.0;
  double far = 0.0;
};

NearFar near_far_planes(double distance, double box_diag, double min_near = 0.01);

enum class SceneType { full_orbit, forward_facing };

struct PoseSamplingConfig {
  SceneType scene_type = SceneType::full_orbit;
  double azimuth_min_deg = -180.0;
  double azimuth_max_deg = 180.0;
  double elevation_min_deg = -90.0;
  double elevation_max_deg = 15.0;
  double radius_jitter = 0.3;
  double recenter_probability = 0.1;
  Vec3 spiral_radii{0.5, 0.5, 0.25};

  void validate() const;
};

struct SampledPose {
  CameraPose pose;
  Vec3 look_target;
  double radius;
};

SampledPose sample_pose(const PoseSamplingConfig& cfg, const RoiBox& box, double afov, const Vec3& center_of_mass,
                        Rng& rng);

struct EdgeSample {
  int edge = 0;
  Vec2 pixel;
  bool visible = false;
};

inline constexpr double kOcclusionRelativeTolerance = 1e-3;

// Samples the 12 box edges, projects them through `pose` onto an image of the
// depth map's resolution and flags samples hidden behind the scene depth.
// Depth values are distances along the camera ray; +inf means empty.
std::vector<EdgeSample> project_box_edges(const RoiBox& box, const CameraPose& pose, const Image& depth_map,
                                          int samples_per_edge);

}  // namespace roiblend

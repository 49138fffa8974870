// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <utility>

#include "roiblend/fields.hpp"
#include "roiblend/geometry.hpp"
#include "roiblend/renderer.hpp"

namespace roiblend {

enum class BlendVariant {
  replace,     // inside the box: generated field only
  smooth,      // distance-smoothed mix of raw values about the tracked center
  object_in,   // alpha-weighted colors, densities summed inside the activation
  object_out,  // alpha-weighted colors, activated densities summed
};

std::string to_string(BlendVariant variant);
BlendVariant blend_variant_from_string(const std::string& name);

struct BlendMode {
  BlendVariant variant = BlendVariant::replace;
  double alpha = 0.0;
  double epsilon = 1e-9;

  void validate() const;
  bool object_blend() const { return variant == BlendVariant::object_in || variant == BlendVariant::object_out; }
};

// f = 1 - exp(-alpha |x - center| / diag). Weight of the original field.
double smooth_blend_weight(const Vec3& x, const Vec3& center, double diag, double alpha);

FieldSample blend_smooth(const FieldSample& original, const FieldSample& generated, double f);

std::pair<double, double> per_point_alphas(double raw_density_original, double raw_density_generated, double delta,
                                           DensityActivation phi);

Vec3 blend_color_alpha(const Vec3& raw_color_original, const Vec3& raw_color_generated, double alpha_original,
                       double alpha_generated, double epsilon);

enum class DensitySum { in_activation, out_activation };

double blend_density(DensitySum mode, double raw_density_original, double raw_density_generated,
                     DensityActivation phi);

// Activated density and color of an object-blended sample, with the partial
// derivatives needed to push cotangents back into the generated field.
struct ObjectBlendSample {
  double density = 0.0;
  Vec3 color = Vec3::Zero();
  double d_density_d_raw_density = 0.0;
  Vec3 d_color_d_raw_density = Vec3::Zero();
  Vec3 d_color_d_raw_color = Vec3::Zero();  // diagonal Jacobian
};

ObjectBlendSample object_blend_sample(const FieldSample& original, const FieldSample& generated, double delta,
                                      DensitySum mode, DensityActivation phi, double epsilon);

// Exponential moving average of the density-weighted center of mass.
class CenterTracker {
 public:
  explicit CenterTracker(double decay = 0.99);

  void update(std::span<const Vec3> positions, std::span<const double> densities);
  void restore(const Vec3& center, bool initialized) {
    center_ = center;
    initialized_ = initialized;
  }

  bool initialized() const { return initialized_; }
  const Vec3& center() const { return center_; }
  double decay() const { return decay_; }
  Vec3 center_or(const Vec3& fallback) const { return initialized_ ? center_ : fallback; }

 private:
  double decay_;
  Vec3 center_ = Vec3::Zero();
  bool initialized_ = false;
};

// Density-weighted mean; uniform mean when every density is below 1e-8.
Vec3 weighted_center(std::span<const Vec3> positions, std::span<const double> densities);

// Edited-scene render: outside the box the original field, inside per mode,
// composited once over the merged samples.
RenderOutput render_blended(const RadianceField& original, const RadianceField& generated, const RoiBox& box,
                            const BlendMode& mode, const Vec3& blend_center, const CameraPose& pose, Resolution res,
                            const SamplingConfig& cfg, const Image& background);

}  // namespace roiblend

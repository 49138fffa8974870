// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "roiblend/fields.hpp"
#include "roiblend/geometry.hpp"
#include "roiblend/image.hpp"

namespace roiblend {

inline constexpr double kWeightEpsilon = 1e-10;     // floor on accumulated weight
inline constexpr double kDisparityEpsilon = 1e-10;  // floor on weighted depth

struct SamplingConfig {
  int samples = 64;       // over [near, far]
  int roi_samples = 64;   // over a ray's ROI interval
  bool stratified = false;
  double near = 0.1;
  double far = 10.0;
  std::uint64_t seed = 0;
  DensityActivation activation = DensityActivation::softplus;

  void validate() const;
};

// Samples along a ray. Sample i stands for the bin [edges_i, edges_i + delta_i];
// delta is the bin width, so the bins of a sampled interval tile it exactly.
struct RaySamples {
  std::vector<double> t;
  std::vector<double> delta;

  std::size_t size() const { return t.size(); }
  void append(const RaySamples& other);
};

// n equal bins over [a, b]; midpoints or one uniform draw per bin.
RaySamples sample_interval(double a, double b, int n, bool stratified, Rng& rng);
RaySamples sample_along_ray(const Ray& ray, int n, bool stratified, Rng& rng);

// Splits [near, far] into the outside segments at the base rate and the ROI
// interval at cfg.roi_samples, concatenated in ascending t.
RaySamples sample_with_refinement(const Ray& ray, const std::optional<Interval>& roi, const SamplingConfig& cfg,
                                  Rng& rng);

struct CompositeResult {
  Vec3 rgb = Vec3::Zero();
  std::vector<double> weights;
  double final_transmittance = 1.0;
};

// Quadrature over pre-activation samples: density through phi, color through
// the sigmoid.
CompositeResult composite(std::span<const double> raw_density, std::span<const Vec3> raw_color,
                          std::span<const double> delta, DensityActivation phi, const Vec3& background);

// Per-ray accumulators over activated samples.
struct RayAccumulation {
  Vec3 rgb = Vec3::Zero();
  double final_transmittance = 1.0;
  double accumulation = 0.0;    // sum of weights
  double weighted_depth = 0.0;  // sum of w_i t_i

  double depth() const;
  double disparity() const;
};

RayAccumulation composite_activated(std::span<const double> density, std::span<const Vec3> color,
                                    std::span<const double> delta, std::span<const double> t, const Vec3& background,
                                    std::vector<double>* weights = nullptr);

struct RayCotangent {
  Vec3 rgb = Vec3::Zero();
  double final_transmittance = 0.0;
  double disparity = 0.0;
};

// Reverse-mode derivative of composite_activated with respect to the
// activated densities and colors.
void composite_activated_backward(std::span<const double> density, std::span<const Vec3> color,
                                  std::span<const double> delta, std::span<const double> t, const Vec3& background,
                                  const RayCotangent& cotangent, std::span<double> d_density,
                                  std::span<Vec3> d_color);

struct RenderOutput {
  Image rgb;
  Image disparity;
  Image depth;
  Image accumulation;
  Image final_transmittance;
  double mean_transmittance = 1.0;

  Resolution resolution() const { return rgb.resolution(); }
};

// Writes one ray's accumulators into pixel (x, y).
void store_pixel(RenderOutput& out, int x, int y, const RayAccumulation& acc);
RenderOutput make_render_output(Resolution res);
void finalize_render_output(RenderOutput& out);

// Background image matching `res`, or black when `background` is empty.
Image resolve_background(const Image& background, Resolution res);

RenderOutput render_view(const RadianceField& field, const CameraPose& pose, Resolution res,
                         const SamplingConfig& cfg, const Image& background,
                         const std::optional<RoiBox>& refine = std::nullopt);

// Only rays crossing the box are sampled, and only within the box; all other
// pixels get the background with transmittance 1.
RenderOutput render_roi(const RadianceField& field, const RoiBox& box, const CameraPose& pose, Resolution res,
                        const SamplingConfig& cfg, const Image& background);

// Depth for occlusion tests: ray depth where accumulation >= 0.5, else +inf.
Image occlusion_depth(const RenderOutput& out);

}  // namespace roiblend

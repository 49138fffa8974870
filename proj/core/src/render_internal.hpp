// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "roiblend/renderer.hpp"

namespace roiblend::detail {

inline constexpr int kPixelsPerChunk = 64;

// Samples of a run of pixels packed into one field batch.
struct PackedRays {
  std::vector<int> pixels;
  std::vector<Eigen::Index> offsets{0};  // ray r owns samples [offsets[r], offsets[r+1])
  std::vector<double> t;
  std::vector<double> delta;
  std::vector<std::uint8_t> inside;      // sample lies in the ray's ROI interval
  Eigen::Matrix3Xd positions;
  Eigen::Matrix3Xd directions;

  int rays() const { return static_cast<int>(pixels.size()); }
  Eigen::Index samples() const { return static_cast<Eigen::Index>(t.size()); }
  Eigen::Index begin(int r) const { return offsets[r]; }
  Eigen::Index count(int r) const { return offsets[r + 1] - offsets[r]; }
};

struct SampledRay {
  RaySamples samples;
  std::optional<Interval> roi;
};

// Returns samples for the ray through pixel index `pixel`, or none when the
// pixel shows the background only.
using RaySampler = std::function<std::optional<SampledRay>(const Ray& ray, int pixel)>;

PackedRays pack_rays(const CameraPose& pose, Resolution res, double near, double far, int pixel_begin,
                     int pixel_end, const RaySampler& sampler);

inline int chunk_count(Resolution res) { return (res.pixels() + kPixelsPerChunk - 1) / kPixelsPerChunk; }

void validate_render_inputs(Resolution res, const SamplingConfig& cfg);

// Background-only pixel: transmittance 1, zero accumulation.
void store_background_pixel(RenderOutput& out, int pixel, const Vec3& background);

}  // namespace roiblend::detail

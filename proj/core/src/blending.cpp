// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#include "roiblend/blending.hpp"

#include <algorithm>
#include <cmath>

#include "render_internal.hpp"

namespace roiblend {

std::string to_string(BlendVariant variant) {
  switch (variant) {
    case BlendVariant::replace:
      return "replace";
    case BlendVariant::smooth:
      return "smooth";
    case BlendVariant::object_in:
      return "object-in";
    case BlendVariant::object_out:
      return "object-out";
  }
  return "";
}

BlendVariant blend_variant_from_string(const std::string& name) {
  for (auto v : {BlendVariant::replace, BlendVariant::smooth, BlendVariant::object_in, BlendVariant::object_out}) {
    if (to_string(v) == name) return v;
  }
  throw InvalidArgument("unknown blend mode: " + name);
}

void BlendMode::validate() const {
  if (!(alpha >= 0.0)) throw InvalidArgument("BlendMode: alpha must be >= 0");
  if (!(epsilon > 0.0)) throw InvalidArgument("BlendMode: epsilon must be > 0");
}

double smooth_blend_weight(const Vec3& x, const Vec3& center, double diag, double alpha) {
  if (!(diag > 0.0)) throw InvalidArgument("smooth_blend_weight: diag must be positive");
  if (!(alpha >= 0.0)) throw InvalidArgument("smooth_blend_weight: alpha must be >= 0");
  return -std::expm1(-alpha * (x - center).norm() / diag);
}

FieldSample blend_smooth(const FieldSample& original, const FieldSample& generated, double f) {
  if (f == 1.0) return original;
  if (f == 0.0) return generated;
  return {f * original.raw_density + (1.0 - f) * generated.raw_density,
          f * original.raw_color + (1.0 - f) * generated.raw_color};
}

std::pair<double, double> per_point_alphas(double raw_density_original, double raw_density_generated, double delta,
                                           DensityActivation phi) {
  if (!(delta > 0.0)) throw InvalidArgument("per_point_alphas: delta must be positive");
  return {-std::expm1(-activate_density(phi, raw_density_original) * delta),
          -std::expm1(-activate_density(phi, raw_density_generated) * delta)};
}

Vec3 blend_color_alpha(const Vec3& raw_color_original, const Vec3& raw_color_generated, double alpha_original,
                       double alpha_generated, double epsilon) {
  const Vec3 mixed = (raw_color_original * alpha_original + raw_color_generated * alpha_generated) /
                     (epsilon + alpha_original + alpha_generated);
  return mixed.unaryExpr([](double c) { return sigmoid(c); });
}

double blend_density(DensitySum mode, double raw_density_original, double raw_density_generated,
                     DensityActivation phi) {
  if (mode == DensitySum::in_activation) return activate_density(phi, raw_density_original + raw_density_generated);
  return activate_density(phi, raw_density_original) + activate_density(phi, raw_density_generated);
}

ObjectBlendSample object_blend_sample(const FieldSample& original, const FieldSample& generated, double delta,
                                      DensitySum mode, DensityActivation phi, double epsilon) {
  ObjectBlendSample s;
  const auto [alpha_o, alpha_g] = per_point_alphas(original.raw_density, generated.raw_density, delta, phi);
  const double d_alpha_g = std::exp(-activate_density(phi, generated.raw_density) * delta) * delta *
                           activate_density_derivative(phi, generated.raw_density);
  const double denom = epsilon + alpha_o + alpha_g;
  const Vec3 mixed = (original.raw_color * alpha_o + generated.raw_color * alpha_g) / denom;
  s.color = mixed.unaryExpr([](double c) { return sigmoid(c); });
  const Vec3 slope = s.color.cwiseProduct(Vec3::Ones() - s.color);
  s.d_color_d_raw_color = slope * (alpha_g / denom);
  s.d_color_d_raw_density = slope.cwiseProduct((generated.raw_color - mixed) / denom) * d_alpha_g;

  s.density = blend_density(mode, original.raw_density, generated.raw_density, phi);
  s.d_density_d_raw_density = mode == DensitySum::in_activation
                                  ? activate_density_derivative(phi, original.raw_density + generated.raw_density)
                                  : activate_density_derivative(phi, generated.raw_density);
  return s;
}

Vec3 weighted_center(std::span<const Vec3> positions, std::span<const double> densities) {
  if (positions.size() != densities.size()) throw InvalidArgument("weighted_center: size mismatch");
  if (positions.empty()) throw InvalidArgument("weighted_center: no samples");
  const bool all_empty = std::all_of(densities.begin(), densities.end(), [](double d) { return d < 1e-8; });
  Vec3 sum = Vec3::Zero();
  double total = 0.0;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const double w = all_empty ? 1.0 : std::max(densities[i], 0.0);
    sum += w * positions[i];
    total += w;
  }
  return sum / total;
}

CenterTracker::CenterTracker(double decay) : decay_(decay) {
  if (!(decay > 0.0 && decay <= 1.0)) throw InvalidArgument("CenterTracker: decay must be in (0, 1]");
}

void CenterTracker::update(std::span<const Vec3> positions, std::span<const double> densities) {
  if (positions.empty()) return;
  const Vec3 batch = weighted_center(positions, densities);
  if (!initialized_) {
    center_ = batch;
    initialized_ = true;
    return;
  }
  center_ = decay_ * center_ + (1.0 - decay_) * batch;
}

RenderOutput render_blended(const RadianceField& original, const RadianceField& generated, const RoiBox& box,
                            const BlendMode& mode, const Vec3& blend_center, const CameraPose& pose, Resolution res,
                            const SamplingConfig& cfg, const Image& background) {
  mode.validate();
  detail::validate_render_inputs(res, cfg);
  const Image bg = resolve_background(background, res);
  RenderOutput out = make_render_output(res);
  const double diag = box.diagonal();
  const DensityActivation phi = cfg.activation;

  detail::RaySampler sampler = [&](const Ray& ray, int pixel) -> std::optional<detail::SampledRay> {
    Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(pixel));
    const auto roi = ray_box_intersect(ray, box);
    return detail::SampledRay{sample_with_refinement(ray, roi, cfg, rng), roi};
  };

  parallel_for(detail::chunk_count(res), [&](int chunk) {
    const int begin = chunk * detail::kPixelsPerChunk;
    const int end = std::min(res.pixels(), begin + detail::kPixelsPerChunk);
    const detail::PackedRays rays = detail::pack_rays(pose, res, cfg.near, cfg.far, begin, end, sampler);
    const FieldBatch fo = original.eval(rays.positions, rays.directions);

    std::vector<Eigen::Index> inside;
    for (Eigen::Index i = 0; i < rays.samples(); ++i) {
      if (rays.inside[i]) inside.push_back(i);
    }
    Eigen::Matrix3Xd gp(3, inside.size());
    Eigen::Matrix3Xd gd(3, inside.size());
    for (std::size_t k = 0; k < inside.size(); ++k) {
      gp.col(k) = rays.positions.col(inside[k]);
      gd.col(k) = rays.directions.col(inside[k]);
    }
    const FieldBatch fg = inside.empty() ? FieldBatch{} : generated.eval(gp, gd);

    std::vector<double> density(rays.samples());
    std::vector<Vec3> color(rays.samples());
    auto activated = [&](const FieldSample& s, Eigen::Index i) {
      density[i] = activate_density(phi, s.raw_density);
      color[i] = s.raw_color.unaryExpr([](double c) { return sigmoid(c); });
    };
    for (Eigen::Index i = 0; i < rays.samples(); ++i) activated(fo.sample(i), i);
    for (std::size_t k = 0; k < inside.size(); ++k) {
      const Eigen::Index i = inside[k];
      const FieldSample g = fg.sample(static_cast<Eigen::Index>(k));
      const FieldSample o = fo.sample(i);
      switch (mode.variant) {
        case BlendVariant::replace:
          activated(g, i);
          break;
        case BlendVariant::smooth: {
          const double f = smooth_blend_weight(rays.positions.col(i), blend_center, diag, mode.alpha);
          activated(blend_smooth(o, g, f), i);
          break;
        }
        case BlendVariant::object_in:
        case BlendVariant::object_out: {
          const auto sum = mode.variant == BlendVariant::object_in ? DensitySum::in_activation
                                                                   : DensitySum::out_activation;
          const ObjectBlendSample s = object_blend_sample(o, g, rays.delta[i], sum, phi, mode.epsilon);
          density[i] = s.density;
          color[i] = s.color;
          break;
        }
      }
    }

    for (int r = 0; r < rays.rays(); ++r) {
      const Eigen::Index b = rays.begin(r);
      const Eigen::Index n = rays.count(r);
      const int pixel = rays.pixels[r];
      const int x = pixel % res.width;
      const int y = pixel / res.width;
      const RayAccumulation acc =
          composite_activated(std::span(density).subspan(b, n), std::span(color).subspan(b, n),
                              std::span(rays.delta).subspan(b, n), std::span(rays.t).subspan(b, n), bg.rgb(x, y));
      store_pixel(out, x, y, acc);
    }
  });
  finalize_render_output(out);
  return out;
}

}  // namespace roiblend

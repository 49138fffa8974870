// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#include "roiblend/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "render_internal.hpp"

namespace roiblend {

void SamplingConfig::validate() const {
  if (samples < 1 || roi_samples < 1) throw InvalidArgument("SamplingConfig: sample counts must be >= 1");
  if (!(near >= 0.0) || !(near < far)) throw InvalidArgument("SamplingConfig: need 0 <= near < far");
}

void RaySamples::append(const RaySamples& other) {
  t.insert(t.end(), other.t.begin(), other.t.end());
  delta.insert(delta.end(), other.delta.begin(), other.delta.end());
}

RaySamples sample_interval(double a, double b, int n, bool stratified, Rng& rng) {
  if (n < 1) throw InvalidArgument("sample_interval: n must be >= 1");
  if (!(a < b)) throw InvalidArgument("sample_interval: empty interval");
  const double h = (b - a) / n;
  std::uniform_real_distribution<double> jitter(0.0, 1.0);
  RaySamples s;
  s.t.resize(n);
  s.delta.assign(n, h);
  for (int i = 0; i < n; ++i) {
    const double u = stratified ? jitter(rng) : 0.5;
    s.t[i] = a + (i + u) * h;
  }
  return s;
}

RaySamples sample_along_ray(const Ray& ray, int n, bool stratified, Rng& rng) {
  return sample_interval(ray.t_near(), ray.t_far(), n, stratified, rng);
}

RaySamples sample_with_refinement(const Ray& ray, const std::optional<Interval>& roi, const SamplingConfig& cfg,
                                  Rng& rng) {
  const double near = ray.t_near();
  const double far = ray.t_far();
  if (!roi) return sample_interval(near, far, cfg.samples, cfg.stratified, rng);
  auto base_count = [&](double len) {
    return std::max(1, static_cast<int>(std::lround(cfg.samples * len / (far - near))));
  };
  RaySamples out;
  if (roi->enter > near) out.append(sample_interval(near, roi->enter, base_count(roi->enter - near), cfg.stratified, rng));
  out.append(sample_interval(roi->enter, roi->exit, cfg.roi_samples, cfg.stratified, rng));
  if (far > roi->exit) out.append(sample_interval(roi->exit, far, base_count(far - roi->exit), cfg.stratified, rng));
  return out;
}

double RayAccumulation::depth() const { return weighted_depth / std::max(accumulation, kWeightEpsilon); }

double RayAccumulation::disparity() const { return accumulation / std::max(weighted_depth, kDisparityEpsilon); }

RayAccumulation composite_activated(std::span<const double> density, std::span<const Vec3> color,
                                    std::span<const double> delta, std::span<const double> t, const Vec3& background,
                                    std::vector<double>* weights) {
  const std::size_t n = density.size();
  if (color.size() != n || delta.size() != n || t.size() != n) {
    throw InvalidArgument("composite: sample arrays differ in length");
  }
  if (weights) weights->assign(n, 0.0);
  RayAccumulation acc;
  double transmittance = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double optical = density[i] * delta[i];
    const double w = transmittance * -std::expm1(-optical);
    acc.rgb += w * color[i];
    acc.accumulation += w;
    acc.weighted_depth += w * t[i];
    if (weights) (*weights)[i] = w;
    transmittance *= std::exp(-optical);
  }
  acc.final_transmittance = transmittance;
  acc.rgb += transmittance * background;
  return acc;
}

void composite_activated_backward(std::span<const double> density, std::span<const Vec3> color,
                                  std::span<const double> delta, std::span<const double> t, const Vec3& background,
                                  const RayCotangent& cotangent, std::span<double> d_density,
                                  std::span<Vec3> d_color) {
  const std::size_t n = density.size();
  // T[i] is the transmittance in front of sample i; T[n] is the final value.
  std::vector<double> trans(n + 1);
  std::vector<double> w(n);
  trans[0] = 1.0;
  double acc = 0.0;
  double wd = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double optical = density[i] * delta[i];
    w[i] = trans[i] * -std::expm1(-optical);
    trans[i + 1] = trans[i] * std::exp(-optical);
    acc += w[i];
    wd += w[i] * t[i];
  }

  // Disparity = acc / max(wd, eps): fold its cotangent into per-sample values.
  double g_acc = 0.0;
  double g_wd = 0.0;
  if (wd > kDisparityEpsilon) {
    g_acc = cotangent.disparity / wd;
    g_wd = -cotangent.disparity * acc / (wd * wd);
  } else {
    g_acc = cotangent.disparity / kDisparityEpsilon;
  }
  const double g_background = cotangent.rgb.dot(background) + cotangent.final_transmittance;

  // d/ds_k of sum_i w_i v_i + T_final b = T_{k+1} v_k - sum_{i>k} w_i v_i - T_final b.
  double suffix = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double v = cotangent.rgb.dot(color[k]) + g_acc + g_wd * t[k];
    const double d_optical = trans[k + 1] * v - suffix - trans[n] * g_background;
    d_density[k] = d_optical * delta[k];
    d_color[k] = w[k] * cotangent.rgb;
    suffix += w[k] * v;
  }
}

CompositeResult composite(std::span<const double> raw_density, std::span<const Vec3> raw_color,
                          std::span<const double> delta, DensityActivation phi, const Vec3& background) {
  const std::size_t n = raw_density.size();
  if (raw_color.size() != n || delta.size() != n) throw InvalidArgument("composite: sample arrays differ in length");
  std::vector<double> density(n);
  std::vector<Vec3> color(n);
  std::vector<double> t(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(delta[i] > 0.0)) throw InvalidArgument("composite: delta must be positive");
    density[i] = activate_density(phi, raw_density[i]);
    color[i] = raw_color[i].unaryExpr([](double c) { return sigmoid(c); });
  }
  CompositeResult out;
  const RayAccumulation acc = composite_activated(density, color, delta, t, background, &out.weights);
  out.rgb = acc.rgb;
  out.final_transmittance = acc.final_transmittance;
  return out;
}

RenderOutput make_render_output(Resolution res) {
  RenderOutput out;
  out.rgb = Image(res, 3);
  out.disparity = Image(res, 1);
  out.depth = Image(res, 1);
  out.accumulation = Image(res, 1);
  out.final_transmittance = Image(res, 1, 1.0);
  return out;
}

void store_pixel(RenderOutput& out, int x, int y, const RayAccumulation& acc) {
  out.rgb.set_rgb(x, y, acc.rgb);
  out.final_transmittance(x, y) = acc.final_transmittance;
  out.accumulation(x, y) = acc.accumulation;
  out.depth(x, y) = acc.depth();
  out.disparity(x, y) = acc.disparity();
}

void finalize_render_output(RenderOutput& out) { out.mean_transmittance = out.final_transmittance.mean(); }

Image resolve_background(const Image& background, Resolution res) {
  if (background.empty()) return Image(res, 3);
  if (background.resolution() != res || background.channels() != 3) {
    throw InvalidArgument("background must be an RGB image at the render resolution");
  }
  return background;
}

Image occlusion_depth(const RenderOutput& out) {
  const Resolution res = out.resolution();
  Image depth(res, 1, std::numeric_limits<double>::infinity());
  for (int y = 0; y < res.height; ++y) {
    for (int x = 0; x < res.width; ++x) {
      if (out.accumulation(x, y) >= 0.5) depth(x, y) = out.depth(x, y);
    }
  }
  return depth;
}

namespace detail {

void validate_render_inputs(Resolution res, const SamplingConfig& cfg) {
  if (res.width <= 0 || res.height <= 0) throw InvalidArgument("render: resolution must be nonzero");
  cfg.validate();
}

PackedRays pack_rays(const CameraPose& pose, Resolution res, double near, double far, int pixel_begin,
                     int pixel_end, const RaySampler& sampler) {
  PackedRays packed;
  std::vector<Vec3> dirs;
  for (int pixel = pixel_begin; pixel < pixel_end; ++pixel) {
    const Ray ray = pose.pixel_ray(pixel % res.width, pixel / res.width, res, near, far);
    auto sampled = sampler(ray, pixel);
    if (!sampled) continue;
    packed.pixels.push_back(pixel);
    for (std::size_t i = 0; i < sampled->samples.size(); ++i) {
      const double t = sampled->samples.t[i];
      packed.t.push_back(t);
      packed.delta.push_back(sampled->samples.delta[i]);
      packed.inside.push_back(sampled->roi && t >= sampled->roi->enter && t <= sampled->roi->exit);
      dirs.push_back(ray.direction());
    }
    packed.offsets.push_back(static_cast<Eigen::Index>(packed.t.size()));
  }
  const Eigen::Index n = packed.samples();
  packed.positions.resize(3, n);
  packed.directions.resize(3, n);
  const Vec3& origin = pose.position();
  for (Eigen::Index i = 0; i < n; ++i) {
    packed.directions.col(i) = dirs[i];
    packed.positions.col(i) = origin + packed.t[i] * dirs[i];
  }
  return packed;
}

void store_background_pixel(RenderOutput& out, int pixel, const Vec3& background) {
  const int w = out.rgb.width();
  RayAccumulation acc;
  acc.rgb = background;
  store_pixel(out, pixel % w, pixel / w, acc);
}

}  // namespace detail

namespace {

// Shared driver: sample, evaluate the field once per chunk, composite per ray.
RenderOutput render_single_field(const RadianceField& field, const CameraPose& pose, Resolution res,
                                 const SamplingConfig& cfg, const Image& background,
                                 const detail::RaySampler& sampler) {
  detail::validate_render_inputs(res, cfg);
  const Image bg = resolve_background(background, res);
  RenderOutput out = make_render_output(res);
  const int chunks = detail::chunk_count(res);
  parallel_for(chunks, [&](int chunk) {
    const int begin = chunk * detail::kPixelsPerChunk;
    const int end = std::min(res.pixels(), begin + detail::kPixelsPerChunk);
    for (int p = begin; p < end; ++p) detail::store_background_pixel(out, p, bg.rgb(p % res.width, p / res.width));
    const detail::PackedRays rays = detail::pack_rays(pose, res, cfg.near, cfg.far, begin, end, sampler);
    if (rays.samples() == 0) return;
    const FieldBatch f = field.eval(rays.positions, rays.directions);
    std::vector<double> density;
    std::vector<Vec3> color;
    for (int r = 0; r < rays.rays(); ++r) {
      const Eigen::Index b = rays.begin(r);
      const Eigen::Index n = rays.count(r);
      density.resize(n);
      color.resize(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        density[i] = activate_density(cfg.activation, f.raw_density[b + i]);
        color[i] = f.raw_color.col(b + i).unaryExpr([](double c) { return sigmoid(c); });
      }
      const int pixel = rays.pixels[r];
      const int x = pixel % res.width;
      const int y = pixel / res.width;
      const RayAccumulation acc = composite_activated(density, color, std::span(rays.delta).subspan(b, n),
                                                      std::span(rays.t).subspan(b, n), bg.rgb(x, y));
      store_pixel(out, x, y, acc);
    }
  });
  finalize_render_output(out);
  return out;
}

}  // namespace

RenderOutput render_view(const RadianceField& field, const CameraPose& pose, Resolution res,
                         const SamplingConfig& cfg, const Image& background, const std::optional<RoiBox>& refine) {
  return render_single_field(field, pose, res, cfg, background,
                             [&](const Ray& ray, int pixel) -> std::optional<detail::SampledRay> {
                               Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(pixel));
                               std::optional<Interval> roi;
                               if (refine) roi = ray_box_intersect(ray, *refine);
                               return detail::SampledRay{sample_with_refinement(ray, roi, cfg, rng), roi};
                             });
}

RenderOutput render_roi(const RadianceField& field, const RoiBox& box, const CameraPose& pose, Resolution res,
                        const SamplingConfig& cfg, const Image& background) {
  return render_single_field(field, pose, res, cfg, background,
                             [&](const Ray& ray, int pixel) -> std::optional<detail::SampledRay> {
                               const auto roi = ray_box_intersect(ray, box);
                               if (!roi) return std::nullopt;
                               Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(pixel));
                               return detail::SampledRay{
                                   sample_interval(roi->enter, roi->exit, cfg.roi_samples, cfg.stratified, rng), roi};
                             });
}

}  // namespace roiblend

// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#include "roiblend/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "render_internal.hpp"
#include "roiblend/checkpoint.hpp"

namespace roiblend {

namespace {

// Chunks whose parameter gradients are reduced together; bounds the memory
// held by per-chunk gradient buffers.
constexpr int kChunksPerGroup = 16;

double round_to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

bool object_mode(const TrainConfig& cfg) { return cfg.blend.object_blend(); }

// Activated samples plus the local derivatives that map activated-sample
// cotangents back onto the generator's raw outputs.
struct ChunkSamples {
  std::vector<double> density;
  std::vector<Vec3> color;
  std::vector<double> d_density_d_raw;
  std::vector<Vec3> d_color_d_raw_color;
  std::vector<Vec3> d_color_d_raw_density;
};

ChunkSamples activate_chunk(const FieldBatch& generated, const FieldBatch* original, const detail::PackedRays& rays,
                            const TrainConfig& cfg) {
  const Eigen::Index n = rays.samples();
  const DensityActivation phi = cfg.sampling.activation;
  ChunkSamples s;
  s.density.resize(n);
  s.color.resize(n);
  s.d_density_d_raw.resize(n);
  s.d_color_d_raw_color.resize(n);
  s.d_color_d_raw_density.assign(n, Vec3::Zero());
  for (Eigen::Index i = 0; i < n; ++i) {
    const FieldSample g = generated.sample(i);
    if (original) {
      const auto sum = cfg.blend.variant == BlendVariant::object_in ? DensitySum::in_activation
                                                                    : DensitySum::out_activation;
      const ObjectBlendSample b = object_blend_sample(original->sample(i), g, rays.delta[i], sum, phi,
                                                      cfg.blend.epsilon);
      s.density[i] = b.density;
      s.color[i] = b.color;
      s.d_density_d_raw[i] = b.d_density_d_raw_density;
      s.d_color_d_raw_color[i] = b.d_color_d_raw_color;
      s.d_color_d_raw_density[i] = b.d_color_d_raw_density;
    } else {
      s.density[i] = activate_density(phi, g.raw_density);
      s.color[i] = g.raw_color.unaryExpr([](double c) { return sigmoid(c); });
      s.d_density_d_raw[i] = activate_density_derivative(phi, g.raw_density);
      s.d_color_d_raw_color[i] = s.color[i].cwiseProduct(Vec3::Ones() - s.color[i]);
    }
  }
  return s;
}

// One Adam update over the masked entries; parameters and moments are kept
// at float precision so checkpoints are lossless.
void adam_update(Eigen::VectorXd& params, AdamMoments& moments, const Eigen::VectorXd& g, const ParameterMask* mask,
                 double lr, int t, const AdamConfig& adam) {
  const double c1 = 1.0 - std::pow(adam.beta1, t);
  const double c2 = 1.0 - std::pow(adam.beta2, t);
  Eigen::VectorXd& m = moments.m;
  Eigen::VectorXd& v = moments.v;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    m[i] = round_to_float(adam.beta1 * m[i] + (1.0 - adam.beta1) * g[i]);
    v[i] = round_to_float(adam.beta2 * v[i] + (1.0 - adam.beta2) * g[i] * g[i]);
    params[i] = round_to_float(params[i] - lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + adam.eps));
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (steps < 0) throw InvalidArgument("TrainConfig: steps must be >= 0");
  if (!(adam.lr > 0.0) || !(adam.lr_final > 0.0)) throw InvalidArgument("TrainConfig: learning rates must be > 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw InvalidArgument("TrainConfig: Adam betas must be in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw InvalidArgument("TrainConfig: Adam eps must be > 0");
  if (!(afov > 0.0 && afov < 3.141592653589793)) throw InvalidArgument("TrainConfig: afov must be in (0, pi)");
  if (!(min_near > 0.0)) throw InvalidArgument("TrainConfig: min_near must be > 0");
  if (resolution.width <= 0 || resolution.height <= 0) throw InvalidArgument("TrainConfig: empty resolution");
  if (backgrounds.empty()) throw InvalidArgument("TrainConfig: at least one background kind is required");
  if (checkpoint_every < 0) throw InvalidArgument("TrainConfig: checkpoint_every must be >= 0");
  if (!(ema_decay > 0.0 && ema_decay <= 1.0)) throw InvalidArgument("TrainConfig: ema_decay must be in (0, 1]");
  pose.validate();
  sampling.validate();
  loss.validate();
  blend.validate();
  generator_arch.validate();
}

TrainState init_train_state(const RadianceField& original, const TrainConfig& cfg) {
  const auto* mlp = dynamic_cast<const MlpField*>(&original);
  MlpField generator = mlp ? clone_field(*mlp) : MlpField::initialize(cfg.generator_arch, cfg.seed);
  const Eigen::Index n = generator.param_count();
  return TrainState{0, std::move(generator), AdamMoments{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)},
                    CenterTracker(cfg.ema_decay), {}};
}

ParameterMask trainable_mask(const MlpField& generator, const TrainConfig& cfg) {
  return cfg.texture_only ? freeze_density_layers(generator) : all_trainable(generator);
}

StepPlan plan_step(int step, const CenterTracker& tracker, const RoiBox& box, const std::string& caption,
                   const TrainConfig& cfg) {
  Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(step));
  PoseSamplingConfig pose_cfg = cfg.pose;
  pose_cfg.scene_type = cfg.scene_type;
  SampledPose view = sample_pose(pose_cfg, box, cfg.afov, tracker.center_or(box.center()), rng);
  const double distance = (view.pose.position() - view.look_target).norm();
  const NearFar planes = near_far_planes(distance, box.diagonal(), cfg.min_near);
  BackgroundSpec spec;
  spec.kind = cfg.backgrounds[static_cast<std::size_t>(step) % cfg.backgrounds.size()];
  spec.seed = rng();
  Image background = make_background(spec, cfg.resolution);
  std::string prompt = directional_prompt(caption, view.pose, cfg.scene_type);
  return StepPlan{std::move(view), planes, spec, std::move(background), std::move(prompt)};
}

Objective evaluate_objective(const MlpField& generator, const RadianceField& original, const RoiBox& box,
                             const Scorer& scorer, const Embedding& text_embedding, const CameraPose& pose,
                             const NearFar& planes, const Image& background, const TrainConfig& cfg,
                             const LossWeights& weights, bool want_gradient) {
  SamplingConfig sampling = cfg.sampling;
  sampling.near = planes.near;
  sampling.far = planes.far;
  const Resolution res = cfg.resolution;
  detail::validate_render_inputs(res, sampling);
  const Image bg = resolve_background(background, res);
  const bool blend_original = object_mode(cfg);

  const detail::RaySampler sampler = [&](const Ray& ray, int pixel) -> std::optional<detail::SampledRay> {
    const auto roi = ray_box_intersect(ray, box);
    if (!roi) return std::nullopt;
    Rng rng = make_rng(sampling.seed, static_cast<std::uint64_t>(pixel));
    return detail::SampledRay{sample_interval(roi->enter, roi->exit, sampling.roi_samples, sampling.stratified, rng),
                              roi};
  };
  auto chunk_range = [&](int chunk) {
    const int begin = chunk * detail::kPixelsPerChunk;
    return std::pair(begin, std::min(res.pixels(), begin + detail::kPixelsPerChunk));
  };

  Objective obj;
  obj.render = make_render_output(res);
  const int chunks = detail::chunk_count(res);
  std::vector<std::vector<Vec3>> chunk_positions(chunks);
  std::vector<std::vector<double>> chunk_densities(chunks);

  parallel_for(chunks, [&](int chunk) {
    const auto [begin, end] = chunk_range(chunk);
    for (int p = begin; p < end; ++p) detail::store_background_pixel(obj.render, p, bg.rgb(p % res.width, p / res.width));
    const detail::PackedRays rays = detail::pack_rays(pose, res, sampling.near, sampling.far, begin, end, sampler);
    if (rays.samples() == 0) return;
    const FieldBatch fg = generator.forward(rays.positions, rays.directions, nullptr);
    const FieldBatch fo = blend_original ? original.eval(rays.positions, rays.directions) : FieldBatch{};
    const ChunkSamples s = activate_chunk(fg, blend_original ? &fo : nullptr, rays, cfg);
    for (int r = 0; r < rays.rays(); ++r) {
      const Eigen::Index b = rays.begin(r);
      const Eigen::Index n = rays.count(r);
      const int pixel = rays.pixels[r];
      const int x = pixel % res.width;
      const int y = pixel / res.width;
      store_pixel(obj.render, x, y,
                  composite_activated(std::span(s.density).subspan(b, n), std::span(s.color).subspan(b, n),
                                      std::span(rays.delta).subspan(b, n), std::span(rays.t).subspan(b, n),
                                      bg.rgb(x, y)));
    }
    for (Eigen::Index i = 0; i < rays.samples(); ++i) {
      chunk_positions[chunk].push_back(box.clamp(rays.positions.col(i)));
      chunk_densities[chunk].push_back(s.density[i]);
    }
  });
  finalize_render_output(obj.render);
  for (int c = 0; c < chunks; ++c) {
    obj.inside_positions.insert(obj.inside_positions.end(), chunk_positions[c].begin(), chunk_positions[c].end());
    obj.inside_densities.insert(obj.inside_densities.end(), chunk_densities[c].begin(), chunk_densities[c].end());
  }

  const Embedding image_embedding = scorer.embed_image(fit_to_scorer(obj.render.rgb, scorer));
  obj.l_sim = similarity_loss(image_embedding, text_embedding);
  obj.l_t = transmittance_loss(obj.render.mean_transmittance, cfg.loss.tau);
  obj.l_d = depth_loss(obj.render.disparity, cfg.loss.rho);
  obj.total = total_loss(obj.l_sim, obj.l_t, obj.l_d, weights);
  if (!want_gradient) return obj;

  const Image g_rgb = scorer.embed_image_vjp(obj.render.rgb, -text_embedding);
  const double g_transmittance = weights.lambda_t *
                                 transmittance_loss_derivative(obj.render.mean_transmittance, cfg.loss.tau) /
                                 static_cast<double>(res.pixels());
  Image g_disparity = depth_loss_gradient(obj.render.disparity, cfg.loss.rho);
  for (double& v : g_disparity.data()) v *= weights.lambda_d;

  // Second pass: recompute each chunk with activations cached and
  // back-propagate; per-chunk gradients are reduced in chunk order.
  obj.gradient = Eigen::VectorXd::Zero(generator.param_count());
  for (int group = 0; group < chunks; group += kChunksPerGroup) {
    const int group_size = std::min(kChunksPerGroup, chunks - group);
    std::vector<Eigen::VectorXd> grads(group_size);
    parallel_for(group_size, [&](int k) {
      const auto [begin, end] = chunk_range(group + k);
      const detail::PackedRays rays = detail::pack_rays(pose, res, sampling.near, sampling.far, begin, end, sampler);
      if (rays.samples() == 0) return;
      MlpCache cache;
      const FieldBatch fg = generator.forward(rays.positions, rays.directions, &cache);
      const FieldBatch fo = blend_original ? original.eval(rays.positions, rays.directions) : FieldBatch{};
      const ChunkSamples s = activate_chunk(fg, blend_original ? &fo : nullptr, rays, cfg);
      std::vector<double> d_density(rays.samples());
      std::vector<Vec3> d_color(rays.samples());
      for (int r = 0; r < rays.rays(); ++r) {
        const Eigen::Index b = rays.begin(r);
        const Eigen::Index n = rays.count(r);
        const int pixel = rays.pixels[r];
        const int x = pixel % res.width;
        const int y = pixel / res.width;
        const RayCotangent cot{g_rgb.rgb(x, y), g_transmittance, g_disparity(x, y)};
        composite_activated_backward(std::span(s.density).subspan(b, n), std::span(s.color).subspan(b, n),
                                     std::span(rays.delta).subspan(b, n), std::span(rays.t).subspan(b, n),
                                     bg.rgb(x, y), cot, std::span(d_density).subspan(b, n),
                                     std::span(d_color).subspan(b, n));
      }
      Eigen::VectorXd d_raw_density(rays.samples());
      Eigen::Matrix3Xd d_raw_color(3, rays.samples());
      for (Eigen::Index i = 0; i < rays.samples(); ++i) {
        d_raw_density[i] = d_density[i] * s.d_density_d_raw[i] + d_color[i].dot(s.d_color_d_raw_density[i]);
        d_raw_color.col(i) = d_color[i].cwiseProduct(s.d_color_d_raw_color[i]);
      }
      grads[k] = Eigen::VectorXd::Zero(generator.param_count());
      generator.backward(cache, d_raw_density, d_raw_color, grads[k]);
    });
    for (const Eigen::VectorXd& g : grads) {
      if (g.size()) obj.gradient += g;
    }
  }
  return obj;
}

double learning_rate(int step, const TrainConfig& cfg) {
  if (cfg.steps <= 0) return cfg.adam.lr;
  const double frac = std::clamp(static_cast<double>(step) / cfg.steps, 0.0, 1.0);
  return cfg.adam.lr * std::pow(cfg.adam.lr_final / cfg.adam.lr, frac);
}

void train_step(TrainState& state, const RadianceField& original, const RoiBox& box, const Scorer& scorer,
                const std::string& caption, const TrainConfig& cfg, const ParameterMask& mask) {
  const int k = state.step;
  MlpField& generator = state.generator;
  const Eigen::Index n = generator.param_count();
  if (static_cast<Eigen::Index>(mask.size()) != n) throw InvalidArgument("train_step: mask size mismatch");

  const StepPlan plan = plan_step(k, state.tracker, box, caption, cfg);
  const LossWeights weights = anneal_weights(std::min(k, cfg.steps), cfg.steps, cfg.loss);
  TrainConfig step_cfg = cfg;
  step_cfg.sampling.seed = mix_seed(mix_seed(cfg.seed, static_cast<std::uint64_t>(k)), 0x73616d70);
  Objective obj = evaluate_objective(generator, original, box, scorer, scorer.embed_text(plan.prompt),
                                     plan.view.pose, plan.planes, plan.background, step_cfg, weights, true);

  auto diagnostic = [&](const std::string& what) {
    std::ostringstream os;
    const Vec3 p = plan.view.pose.position();
    os << what << " at step " << k << " (camera " << p.x() << "," << p.y() << "," << p.z() << "; l_sim " << obj.l_sim
       << ", l_t " << obj.l_t << ", l_d " << obj.l_d << ")";
    return os.str();
  };
  if (!std::isfinite(obj.total) || !obj.gradient.allFinite()) throw TrainingError(diagnostic("non-finite loss"));

  Eigen::VectorXd& g = obj.gradient;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!mask[i]) g[i] = 0.0;
  }
  const double norm = g.norm();
  if (cfg.adam.clip_norm > 0.0 && norm > cfg.adam.clip_norm) g *= cfg.adam.clip_norm / norm;

  Eigen::VectorXd& params = generator.mutable_params();
  adam_update(params, state.moments, g, &mask, learning_rate(k, cfg), k + 1, cfg.adam);
  if (!params.allFinite()) throw TrainingError(diagnostic("non-finite parameters"));

  state.tracker.update(obj.inside_positions, obj.inside_densities);
  state.history.push_back({k + 1, obj.l_sim, obj.l_t, obj.l_d, weights.lambda_t, weights.lambda_d, obj.total});
  state.step = k + 1;
}

TrainState train(const RadianceField& original, const RoiBox& box, const std::string& caption,
                 const TrainConfig& cfg, const Scorer& scorer, TrainOptions options) {
  cfg.validate();
  TrainState state = options.resume ? std::move(*options.resume) : init_train_state(original, cfg);
  if (options.resume) {
    const auto* mlp = dynamic_cast<const MlpField*>(&original);
    if (mlp && !(mlp->architecture() == state.generator.architecture())) {
      throw TrainingError("resume state architecture does not match the original field");
    }
    if (state.moments.m.size() != state.generator.param_count() ||
        state.moments.v.size() != state.generator.param_count()) {
      throw TrainingError("resume state moments do not match the generator");
    }
  }
  const ParameterMask mask = trainable_mask(state.generator, cfg);
  while (state.step < cfg.steps) {
    try {
      train_step(state, original, box, scorer, caption, cfg, mask);
    } catch (...) {
      if (!options.state_path.empty()) save_train_state(options.state_path, state);
      throw;
    }
    if (!options.state_path.empty() && cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0) {
      save_train_state(options.state_path, state);
    }
    if (options.on_step) options.on_step(state);
  }
  return state;
}

MlpField distill_field(const RadianceField& source, const Vec3& lo, const Vec3& hi, const MlpArchitecture& arch,
                       const DistillConfig& cfg, std::vector<double>* losses) {
  if (!(lo.array() < hi.array()).all()) throw InvalidArgument("distill_field: empty bounds");
  if (cfg.steps < 0 || cfg.batch < 1 || !(cfg.lr > 0.0)) throw InvalidArgument("distill_field: invalid config");
  MlpField field = MlpField::initialize(arch, cfg.seed);
  const Eigen::Index n = field.param_count();
  AdamMoments moments{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  AdamConfig adam;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int step = 0; step < cfg.steps; ++step) {
    Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(step));
    Eigen::Matrix3Xd x(3, cfg.batch);
    Eigen::Matrix3Xd d(3, cfg.batch);
    for (int i = 0; i < cfg.batch; ++i) {
      for (int a = 0; a < 3; ++a) x(a, i) = lo[a] + (hi[a] - lo[a]) * unit(rng);
      d.col(i) = Vec3(normal(rng), normal(rng), normal(rng)).normalized();
    }
    const FieldBatch target = source.eval(x, d);
    MlpCache cache;
    const FieldBatch out = field.forward(x, d, &cache);
    Eigen::VectorXd d_density(cfg.batch);
    Eigen::Matrix3Xd d_color(3, cfg.batch);
    double loss = 0.0;
    for (int i = 0; i < cfg.batch; ++i) {
      const double want = std::min(activate_density(cfg.activation, target.raw_density[i]), cfg.density_cap);
      const double got = activate_density(cfg.activation, out.raw_density[i]);
      // Density error is scaled by the cap so both terms are O(1).
      const double e = (got - want) / cfg.density_cap;
      loss += e * e;
      d_density[i] = 2.0 * e / cfg.density_cap * activate_density_derivative(cfg.activation, out.raw_density[i]);
      for (int c = 0; c < 3; ++c) {
        const double s = sigmoid(out.raw_color(c, i));
        const double ec = s - sigmoid(target.raw_color(c, i));
        loss += ec * ec;
        d_color(c, i) = 2.0 * ec * s * (1.0 - s);
      }
    }
    d_density /= cfg.batch;
    d_color /= cfg.batch;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    field.backward(cache, d_density, d_color, g);
    adam_update(field.mutable_params(), moments, g, nullptr, cfg.lr, step + 1, adam);
    if (losses) losses->push_back(loss / cfg.batch);
  }
  return field;
}

void write_loss_history_csv(const std::filesystem::path& path, const std::vector<LossRecord>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "step,l_sim,l_t,l_d,lambda_t,lambda_d,total\n";
  for (const LossRecord& r : history) {
    out << r.step << ',' << r.l_sim << ',' << r.l_t << ',' << r.l_d << ',' << r.lambda_t << ',' << r.lambda_d << ','
        << r.total << '\n';
  }
}

}  // namespace roiblend

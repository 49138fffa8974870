// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "roiblend/background.hpp"
#include "roiblend/blending.hpp"
#include "roiblend/guidance.hpp"
#include "roiblend/mlp_field.hpp"
#include "roiblend/renderer.hpp"

namespace roiblend {

struct AdamConfig {
  double lr = 5e-4;
  double lr_final = 5e-5;  // exponential decay target at the last step
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 10.0;  // global gradient norm; <= 0 disables clipping
};

struct TrainConfig {
  int steps = 1000;
  AdamConfig adam;
  std::uint64_t seed = 123;
  PoseSamplingConfig pose;
  SceneType scene_type = SceneType::full_orbit;
  double afov = 1.0471975511965976;  // 60 degrees
  double min_near = 0.01;
  Resolution resolution{168, 168};
  SamplingConfig sampling;  // roi_samples, stratified and activation are used
  LossConfig loss;
  BlendMode blend;
  bool texture_only = false;
  std::vector<BackgroundKind> backgrounds{BackgroundKind::gaussian_noise, BackgroundKind::checkerboard,
                                          BackgroundKind::fourier_texture};
  int checkpoint_every = 0;
  double ema_decay = 0.99;
  MlpArchitecture generator_arch;  // used only when the original field is not an MLP

  void validate() const;
};

struct LossRecord {
  int step = 0;
  double l_sim = 0.0;
  double l_t = 0.0;
  double l_d = 0.0;
  double lambda_t = 0.0;
  double lambda_d = 0.0;
  double total = 0.0;
};

struct AdamMoments {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
};

struct TrainState {
  int step = 0;
  MlpField generator;
  AdamMoments moments;
  CenterTracker tracker;
  std::vector<LossRecord> history;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// F_G starts as a clone of an MLP original; otherwise as a fresh network
// seeded from cfg.seed.
TrainState init_train_state(const RadianceField& original, const TrainConfig& cfg);

ParameterMask trainable_mask(const MlpField& generator, const TrainConfig& cfg);

// Everything drawn at random for one step; a pure function of (seed, step).
struct StepPlan {
  SampledPose view;
  NearFar planes;
  BackgroundSpec background_spec;
  Image background;
  std::string prompt;
};

StepPlan plan_step(int step, const CenterTracker& tracker, const RoiBox& box, const std::string& caption,
                   const TrainConfig& cfg);

struct Objective {
  double l_sim = 0.0;
  double l_t = 0.0;
  double l_d = 0.0;
  double total = 0.0;
  Eigen::VectorXd gradient;  // d total / d generator params (empty if not requested)
  RenderOutput render;
  std::vector<Vec3> inside_positions;
  std::vector<double> inside_densities;
};

// Renders the ROI view (insertion/replacement or object blending per
// cfg.blend), scores it and, when requested, back-propagates the total loss
// into the generator parameters. The original field receives no gradient.
Objective evaluate_objective(const MlpField& generator, const RadianceField& original, const RoiBox& box,
                             const Scorer& scorer, const Embedding& text_embedding, const CameraPose& pose,
                             const NearFar& planes, const Image& background, const TrainConfig& cfg,
                             const LossWeights& weights, bool want_gradient);

double learning_rate(int step, const TrainConfig& cfg);

void train_step(TrainState& state, const RadianceField& original, const RoiBox& box, const Scorer& scorer,
                const std::string& caption, const TrainConfig& cfg, const ParameterMask& mask);

struct TrainOptions {
  std::optional<TrainState> resume;
  std::filesystem::path state_path;  // periodic checkpoints and the flush on abort
  std::function<void(const TrainState&)> on_step;
};

TrainState train(const RadianceField& original, const RoiBox& box, const std::string& caption,
                 const TrainConfig& cfg, const Scorer& scorer, TrainOptions options = {});

// Regresses an MLP onto the activated density and color of `source` at
// points drawn uniformly in [lo, hi]. Used to bake analytic scenes into
// trainable checkpoints.
struct DistillConfig {
  int steps = 2000;
  int batch = 2048;
  double lr = 5e-3;
  double density_cap = 50.0;  // activated target densities are clipped here
  std::uint64_t seed = 123;
  DensityActivation activation = DensityActivation::softplus;
};

MlpField distill_field(const RadianceField& source, const Vec3& lo, const Vec3& hi, const MlpArchitecture& arch,
                       const DistillConfig& cfg, std::vector<double>* losses = nullptr);

void write_loss_history_csv(const std::filesystem::path& path, const std::vector<LossRecord>& history);

}  // namespace roiblend

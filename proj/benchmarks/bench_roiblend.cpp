// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <numbers>

#include "roiblend/background.hpp"
#include "roiblend/blending.hpp"
#include "roiblend/guidance.hpp"
#include "roiblend/mlp_field.hpp"
#include "roiblend/renderer.hpp"
#include "roiblend/trainer.hpp"

using namespace roiblend;

namespace {

AnalyticField checker_table() {
  return AnalyticField::checker(Vec3(0.0, -0.25, 0.0), Vec3(3.0, 0.5, 3.0), 0.5, 10.0, Vec3(1.5, 0.8, 0.2),
                                Vec3(-0.5, -1.0, -1.5));
}

const RoiBox kBox(Vec3(0.0, 0.5, 0.0), Vec3::Ones());

CameraPose camera() { return CameraPose::look_at(Vec3(0.0, 1.5, 4.0), Vec3::Zero(), Vec3::UnitY(), std::numbers::pi / 3.0); }

void BM_Composite(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  std::normal_distribution<double> g(0.0, 2.0);
  std::vector<double> density(n);
  std::vector<Vec3> color(n);
  std::vector<double> delta(n, 0.05);
  for (std::size_t i = 0; i < n; ++i) {
    density[i] = g(rng);
    color[i] = Vec3(g(rng), g(rng), g(rng));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(composite(density, color, delta, DensityActivation::softplus, Vec3::Ones()));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Composite)->Arg(64)->Arg(256);

void BM_RenderView(benchmark::State& state) {
  const auto table = checker_table();
  const Resolution res{static_cast<int>(state.range(0)), static_cast<int>(state.range(0))};
  const Image bg = make_background({BackgroundKind::white, 0}, res);
  const SamplingConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(render_view(table, camera(), res, cfg, bg));
  state.SetItemsProcessed(state.iterations() * res.pixels());
}
BENCHMARK(BM_RenderView)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_MlpForward(benchmark::State& state) {
  const MlpField field = MlpField::initialize({3, 32, 6, 2}, 5);
  const auto n = state.range(0);
  Rng rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::Matrix3Xd p(3, n);
  Eigen::Matrix3Xd d(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    p.col(i) = Vec3(u(rng), u(rng), u(rng));
    d.col(i) = Vec3(u(rng), u(rng), 1.0).normalized();
  }
  for (auto _ : state) benchmark::DoNotOptimize(field.eval(p, d));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_MlpForward)->Arg(1024)->Arg(8192)->Unit(benchmark::kMicrosecond);

void BM_RenderBlended(benchmark::State& state) {
  const auto table = checker_table();
  const MlpField generator = MlpField::initialize({3, 32, 6, 2}, 5);
  const Resolution res{32, 32};
  const Image bg = make_background({BackgroundKind::white, 0}, res);
  BlendMode mode;
  mode.variant = static_cast<BlendVariant>(state.range(0));
  mode.alpha = 2.0;
  const SamplingConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(render_blended(table, generator, kBox, mode, kBox.center(), camera(), res, cfg, bg));
  }
}
BENCHMARK(BM_RenderBlended)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

// One optimizer step at the end-to-end training configuration.
void BM_TrainStep(benchmark::State& state) {
  const auto table = checker_table();
  TrainConfig cfg;
  cfg.steps = 1000;
  cfg.resolution = {32, 32};
  cfg.sampling.roi_samples = 32;
  cfg.generator_arch = {3, 32, 6, 2};
  MockScorer scorer({32, 32}, 7);
  TrainState train_state = init_train_state(table, cfg);
  const ParameterMask mask = trainable_mask(train_state.generator, cfg);
  for (auto _ : state) {
    if (train_state.step >= cfg.steps) train_state = init_train_state(table, cfg);
    train_step(train_state, table, kBox, scorer, "a red cube", cfg, mask);
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_MockScorerVjp(benchmark::State& state) {
  MockScorer scorer({32, 32}, 7);
  Image img({32, 32}, 3, 0.5);
  img(3, 4, 0) = 1.0;
  const Embedding cot = scorer.embed_text("a red cube");
  for (auto _ : state) benchmark::DoNotOptimize(scorer.embed_image_vjp(img, cot));
}
BENCHMARK(BM_MockScorerVjp);

}  // namespace

BENCHMARK_MAIN();

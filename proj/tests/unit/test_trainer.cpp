// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include "doctest.h"
#include "support.hpp"

#include "roiblend/checkpoint.hpp"
#include "roiblend/trainer.hpp"

using namespace roiblend;
using doctest::Approx;

namespace {

const std::string kCaption = "a red disc";

MlpArchitecture tiny_arch() {
  MlpArchitecture a;
  a.depth = 2;
  a.width = 16;
  a.pos_frequencies = 3;
  a.dir_frequencies = 1;
  return a;
}

TrainConfig small_config(int steps) {
  TrainConfig cfg;
  cfg.steps = steps;
  cfg.resolution = {12, 12};
  cfg.sampling.roi_samples = 16;
  cfg.generator_arch = tiny_arch();
  cfg.adam.lr = 5e-3;
  cfg.adam.lr_final = 5e-4;
  return cfg;
}

MockScorer red_disc_scorer(Resolution res) {
  MockScorer scorer(res, 7);
  scorer.register_caption(kCaption, testing::red_disc(res));
  return scorer;
}

Eigen::Matrix3Xd probe_points(const RoiBox& box, int n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::Matrix3Xd p(3, n);
  for (int i = 0; i < n; ++i) p.col(i) = box.sample_uniform(rng);
  return p;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("roiblend_trainer_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Scorer that breaks every image embedding.
class NanScorer final : public Scorer {
 public:
  Resolution input_resolution() const override { return inner_.input_resolution(); }
  int dim() const override { return inner_.dim(); }
  Embedding embed_image(const Image&) const override {
    return Embedding::Constant(dim(), std::numeric_limits<double>::quiet_NaN());
  }
  Embedding embed_text(std::string_view text) const override { return inner_.embed_text(text); }
  Image embed_image_vjp(const Image& image, const Embedding&) const override {
    return Image(image.resolution(), 3, std::numeric_limits<double>::quiet_NaN());
  }

 private:
  MockScorer inner_{{12, 12}, 1};
};

// Max relative error of evaluate_objective's gradient on `count` parameters.
// Parameters whose one-sided differences disagree sit on a ReLU kink at this
// step and are rechecked with a much smaller one.
double objective_gradient_error(const TrainConfig& cfg, const RadianceField& original, int count, int* kinked) {
  const RoiBox box = testing::example_box();
  MlpField generator = MlpField::initialize(cfg.generator_arch, 31);
  const MockScorer scorer = red_disc_scorer(cfg.resolution);
  const StepPlan plan = plan_step(0, CenterTracker(), box, kCaption, cfg);
  const Embedding text = scorer.embed_text(plan.prompt);
  const LossWeights weights{0.25, 4.0};
  auto total = [&]() {
    return evaluate_objective(generator, original, box, scorer, text, plan.view.pose, plan.planes, plan.background, cfg,
                              weights, false)
        .total;
  };
  const Objective obj = evaluate_objective(generator, original, box, scorer, text, plan.view.pose, plan.planes,
                                           plan.background, cfg, weights, true);
  auto slopes = [&](Eigen::Index k, double h) {
    const double saved = generator.params()[k];
    const double mid = total();
    generator.mutable_params()[k] = saved + h;
    const double up = total();
    generator.mutable_params()[k] = saved - h;
    const double down = total();
    generator.mutable_params()[k] = saved;
    return std::array<double, 3>{(up - down) / (2 * h), (up - mid) / h, (mid - down) / h};
  };
  Rng rng(77);
  std::uniform_int_distribution<Eigen::Index> pick(0, generator.param_count() - 1);
  double worst = 0.0;
  *kinked = 0;
  for (int i = 0; i < count; ++i) {
    const Eigen::Index k = pick(rng);
    auto s = slopes(k, 1e-4);
    if (std::abs(s[1] - s[2]) > 1e-3 * std::max({std::abs(s[0]), std::abs(obj.gradient[k]), 1e-7})) {
      ++*kinked;
      s = slopes(k, 1e-7);
    }
    const double scale = std::max({std::abs(s[0]), std::abs(obj.gradient[k]), 1e-7});
    worst = std::max(worst, std::abs(s[0] - obj.gradient[k]) / scale);
  }
  return worst;
}

}  // namespace

TEST_CASE("TrainConfig validation") {
  TrainConfig cfg = small_config(10);
  CHECK_NOTHROW(cfg.validate());
  cfg.adam.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = small_config(-1);
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = small_config(10);
  cfg.backgrounds.clear();
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("learning rate decays exponentially to lr_final") {
  const TrainConfig cfg = small_config(100);
  CHECK(learning_rate(0, cfg) == 5e-3);
  CHECK(learning_rate(100, cfg) == Approx(5e-4).epsilon(1e-12));
  CHECK(learning_rate(50, cfg) == Approx(std::sqrt(5e-3 * 5e-4)).epsilon(1e-12));
}

TEST_CASE("plan_step is a pure function of (seed, step) and cycles backgrounds") {
  const TrainConfig cfg = small_config(10);
  const RoiBox box = testing::example_box();
  const StepPlan a = plan_step(3, CenterTracker(), box, kCaption, cfg);
  const StepPlan b = plan_step(3, CenterTracker(), box, kCaption, cfg);
  CHECK(a.view.pose.position() == b.view.pose.position());
  CHECK(a.background == b.background);
  CHECK(a.prompt == b.prompt);
  CHECK(a.prompt.rfind(kCaption, 0) == 0);
  for (int s = 0; s < 6; ++s) {
    CHECK(plan_step(s, CenterTracker(), box, kCaption, cfg).background_spec.kind ==
          cfg.backgrounds[static_cast<std::size_t>(s) % cfg.backgrounds.size()]);
  }
  const double d = camera_distance(cfg.afov, box.max_extent());
  CHECK(a.planes.far - a.planes.near >= box.diagonal() - 1e-12);
  CHECK((a.view.pose.position() - a.view.look_target).norm() <= d * 1.3 + 1e-9);
}

TEST_CASE("objective gradient matches central differences (replace mode)") {
  TrainConfig cfg = small_config(10);
  cfg.generator_arch.depth = 3;
  cfg.loss.tau = 1.0;   // keeps L_T on its sloped branch
  cfg.loss.rho = 10.0;  // keeps L_D on its sloped branch
  int kinked = 0;
  const auto table = testing::checker_table();
  CHECK(objective_gradient_error(cfg, table, 30, &kinked) < 1e-3);
  CHECK(kinked < 10);
}

TEST_CASE("objective gradient matches central differences (object blending)") {
  TrainConfig cfg = small_config(10);
  cfg.loss.tau = 1.0;
  cfg.loss.rho = 10.0;
  cfg.blend.variant = BlendVariant::object_in;
  int kinked = 0;
  const auto table = testing::checker_table();
  CHECK(objective_gradient_error(cfg, table, 20, &kinked) < 1e-3);
  cfg.blend.variant = BlendVariant::object_out;
  CHECK(objective_gradient_error(cfg, table, 20, &kinked) < 1e-3);
}

TEST_CASE("training is deterministic and never touches the original field") {
  const TrainConfig cfg = small_config(6);
  const MlpField original = MlpField::initialize(tiny_arch(), 5);
  const std::uint64_t before = original.checksum();
  const MockScorer scorer = red_disc_scorer(cfg.resolution);
  const RoiBox box = testing::example_box();
  const TrainState a = train(original, box, kCaption, cfg, scorer);
  const TrainState b = train(original, box, kCaption, cfg, scorer);
  CHECK(original.checksum() == before);
  CHECK(a.generator.params() == b.generator.params());
  REQUIRE(a.history.size() == 6);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].step == static_cast<int>(i) + 1);
    CHECK(a.history[i].total == b.history[i].total);
    CHECK(a.history[i].l_sim == b.history[i].l_sim);
    if (i > 0) {
      CHECK(a.history[i].lambda_t >= a.history[i - 1].lambda_t);
      CHECK(a.history[i].lambda_d >= a.history[i - 1].lambda_d);
    }
  }
  CHECK(a.generator.params() != original.params());
  CHECK(a.tracker.initialized());
  CHECK(box.contains(a.tracker.center(), 1e-12));
  for (Eigen::Index i = 0; i < a.generator.param_count(); ++i) {
    CHECK(static_cast<double>(static_cast<float>(a.generator.params()[i])) == a.generator.params()[i]);
  }

  TrainConfig other = cfg;
  other.seed = 124;
  CHECK(train(original, box, kCaption, other, scorer).generator.params() != a.generator.params());
}

TEST_CASE("texture-only training keeps every density output of the clone") {
  TrainConfig cfg = small_config(5);
  cfg.texture_only = true;
  const MlpField original = MlpField::initialize(tiny_arch(), 5);
  const MockScorer scorer = red_disc_scorer(cfg.resolution);
  const RoiBox box = testing::example_box();
  const TrainState s = train(original, box, kCaption, cfg, scorer);
  const Eigen::Matrix3Xd x = probe_points(box, 64, 3);
  Eigen::Matrix3Xd d = Eigen::Matrix3Xd::Zero(3, 64);
  d.row(2).setOnes();
  const FieldBatch fo = original.eval(x, d);
  const FieldBatch fg = s.generator.eval(x, d);
  CHECK(fo.raw_density == fg.raw_density);
  CHECK((fo.raw_color - fg.raw_color).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("a target equal to the initial render is already optimal") {
  TrainConfig cfg = small_config(10);
  cfg.adam.lr = 1e-12;
  cfg.adam.lr_final = 1e-12;
  cfg.loss.lambda_t = 0.0;
  cfg.loss.lambda_d = 0.0;
  const MlpField original = MlpField::initialize(tiny_arch(), 5);
  const RoiBox box = testing::example_box();
  TrainState state = init_train_state(original, cfg);
  const StepPlan plan = plan_step(0, state.tracker, box, kCaption, cfg);
  MockScorer scorer(cfg.resolution, 7);
  const Objective first = evaluate_objective(state.generator, original, box, scorer, scorer.embed_text(plan.prompt),
                                             plan.view.pose, plan.planes, plan.background, cfg, {}, false);
  scorer.register_caption(kCaption, first.render.rgb);
  const ParameterMask mask = trainable_mask(state.generator, cfg);
  const Eigen::VectorXd start = state.generator.params();
  for (int k = 0; k < 10; ++k) train_step(state, original, box, scorer, kCaption, cfg, mask);
  CHECK(state.history.front().l_sim <= -1.0 + 1e-3);
  CHECK((state.generator.params() - start).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("resume from a saved state reproduces the uninterrupted run exactly") {
  const TrainConfig cfg = small_config(6);
  const auto table = testing::checker_table();
  const MockScorer scorer = red_disc_scorer(cfg.resolution);
  const RoiBox box = testing::example_box();
  const TrainState full = train(table, box, kCaption, cfg, scorer);

  const auto dir = temp_dir("resume");
  TrainOptions opts;
  opts.state_path = dir / "state.rbs";
  // Same schedule as the full run: stop early by throwing from the callback.
  TrainConfig interrupted = cfg;
  interrupted.checkpoint_every = 1;
  opts.on_step = [](const TrainState& s) {
    if (s.step == 3) throw std::runtime_error("interrupt");
  };
  CHECK_THROWS_AS(train(table, box, kCaption, interrupted, scorer, opts), std::runtime_error);
  TrainState saved = load_train_state(dir / "state.rbs");
  CHECK(saved.step == 3);

  TrainOptions resume;
  resume.resume = std::move(saved);
  const TrainState resumed = train(table, box, kCaption, cfg, scorer, std::move(resume));
  CHECK(resumed.step == 6);
  CHECK(resumed.generator.params() == full.generator.params());
  CHECK(resumed.moments.m == full.moments.m);
  CHECK(resumed.moments.v == full.moments.v);
  CHECK(resumed.tracker.center() == full.tracker.center());
  REQUIRE(resumed.history.size() == full.history.size());
  for (std::size_t i = 0; i < full.history.size(); ++i) CHECK(resumed.history[i].total == full.history[i].total);
  std::filesystem::remove_all(dir);
}

TEST_CASE("zero steps leave the generator equal to the original") {
  const TrainConfig cfg = small_config(0);
  const MlpField original = MlpField::initialize(tiny_arch(), 5);
  const MockScorer scorer = red_disc_scorer(cfg.resolution);
  const RoiBox box = testing::example_box();
  const TrainState s = train(original, box, kCaption, cfg, scorer);
  CHECK(s.step == 0);
  CHECK(s.history.empty());
  CHECK(s.generator.params() == original.params());

  const CameraPose pose = testing::default_camera();
  SamplingConfig sampling;
  sampling.samples = 32;
  sampling.roi_samples = 16;
  BlendMode mode;
  const RenderOutput blended =
      render_blended(original, s.generator, box, mode, box.center(), pose, {16, 16}, sampling, Image());
  const RenderOutput plain = render_view(original, pose, {16, 16}, sampling, Image(), box);
  CHECK(testing::max_abs_diff(blended.rgb, plain.rgb) < 1e-12);
}

TEST_CASE("non-finite losses abort with a diagnostic and flush the state") {
  const TrainConfig cfg = small_config(4);
  const auto table = testing::checker_table();
  const NanScorer scorer;
  const auto dir = temp_dir("abort");
  TrainOptions opts;
  opts.state_path = dir / "state.rbs";
  try {
    train(table, testing::example_box(), kCaption, cfg, scorer, opts);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    const std::string what = e.what();
    CHECK(what.find("non-finite loss") != std::string::npos);
    CHECK(what.find("step 0") != std::string::npos);
    CHECK(what.find("camera") != std::string::npos);
  }
  CHECK(std::filesystem::exists(dir / "state.rbs"));
  CHECK(load_train_state(dir / "state.rbs").step == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("distill_field fits an analytic field") {
  const auto sphere = AnalyticField::uniform_sphere(Vec3::Zero(), 0.5, 3.0, Vec3(2, -1, 0));
  DistillConfig cfg;
  cfg.steps = 150;
  cfg.batch = 256;
  std::vector<double> losses;
  const MlpField fit = distill_field(sphere, Vec3::Constant(-1.0), Vec3::Constant(1.0), tiny_arch(), cfg, &losses);
  REQUIRE(losses.size() == 150);
  double head = 0.0;
  double tail = 0.0;
  for (int i = 0; i < 10; ++i) {
    head += losses[i];
    tail += losses[losses.size() - 1 - i];
  }
  CHECK(tail < 0.5 * head);
  CHECK(fit.architecture() == tiny_arch());
  CHECK_THROWS_AS(distill_field(sphere, Vec3::Ones(), Vec3::Zero(), tiny_arch(), cfg), InvalidArgument);
}

TEST_CASE("loss history CSV") {
  const auto dir = temp_dir("csv");
  write_loss_history_csv(dir / "h.csv", {{1, -0.5, -0.8, -0.1, 0.0, 0.0, -0.5}, {2, -0.6, -0.8, -0.1, 0.1, 1.0, -0.78}});
  std::ifstream in(dir / "h.csv");
  std::string header;
  std::string row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "step,l_sim,l_t,l_d,lambda_t,lambda_d,total");
  CHECK(row.rfind("1,", 0) == 0);
  int rows = 1;
  while (std::getline(in, row)) ++rows;
  CHECK(rows == 2);
  std::filesystem::remove_all(dir);
}

// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "roiblend/geometry.hpp"
#include "roiblend/image.hpp"

namespace roiblend {

using Embedding = Eigen::VectorXd;

// Image-text embedding model. Embeddings are unit vectors in a shared space.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual Resolution input_resolution() const = 0;
  virtual int dim() const = 0;
  virtual Embedding embed_image(const Image& image) const = 0;
  virtual Embedding embed_text(std::string_view text) const = 0;

  // Cotangent on the input image of <cotangent, embed_image(image)>.
  virtual Image embed_image_vjp(const Image& image, const Embedding& cotangent) const = 0;
};

// Deterministic stand-in for a pretrained model: the image embedding is a fixed
// random orthonormal map of the mean-centered pixel vector, and each
// registered caption embeds to its target image's embedding.
class MockScorer final : public Scorer {
 public:
  explicit MockScorer(Resolution input = {32, 32}, std::uint64_t seed = 7);

  void register_caption(const std::string& caption, const Image& target);

  Resolution input_resolution() const override { return input_; }
  int dim() const override { return static_cast<int>(perm_.size()); }
  Embedding embed_image(const Image& image) const override;
  Embedding embed_text(std::string_view text) const override;
  Image embed_image_vjp(const Image& image, const Embedding& cotangent) const override;

 private:
  Eigen::VectorXd centered_features(const Image& image) const;
  Eigen::VectorXd apply_map(const Eigen::VectorXd& features) const;
  Eigen::VectorXd apply_map_transpose(const Eigen::VectorXd& embedding) const;

  Resolution input_;
  std::uint64_t seed_;
  std::vector<int> perm_;
  std::vector<Eigen::MatrixXd> blocks_;
  Embedding fallback_;
  std::map<std::string, Embedding, std::less<>> captions_;
};

// Scorer inputs must match the scorer resolution; resamples bilinearly.
Image fit_to_scorer(const Image& image, const Scorer& scorer);

double similarity_loss(const Embedding& image_embedding, const Embedding& text_embedding);

inline constexpr const char* kDirectionalSuffixes[] = {", top-down view", ", front view", ", side view",
                                                       ", back view"};

std::string directional_suffix(const CameraPose& pose, SceneType scene_type);
std::string directional_prompt(const std::string& caption, const CameraPose& pose, SceneType scene_type);

// Strips a trailing directional suffix, if any.
std::string_view strip_directional_suffix(std::string_view text);

struct LossConfig {
  double tau = 0.88;
  double rho = 0.2;
  double lambda_t = 0.25;
  double lambda_d = 4.0;
  double ramp_start = 0.0;  // fractions of total steps
  double ramp_end = 0.2;

  void validate() const;
};

struct LossWeights {
  double lambda_t = 0.0;
  double lambda_d = 0.0;
};

double transmittance_loss(double mean_transmittance, double tau);
// d/d(mean_transmittance); the interior branch is taken at the kink.
double transmittance_loss_derivative(double mean_transmittance, double tau);

double population_variance(const Image& map);
double depth_loss(const Image& disparity, double rho);
// Per-pixel d(depth_loss)/d(disparity).
Image depth_loss_gradient(const Image& disparity, double rho);

LossWeights anneal_weights(int step, int total, const LossConfig& cfg);

double total_loss(double l_sim, double l_t, double l_d, const LossWeights& weights);

}  // namespace roiblend

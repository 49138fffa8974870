// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#include "roiblend/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/QR>

namespace roiblend {

namespace {

constexpr int kBlockSize = 64;

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) h = (h ^ c) * 1099511628211ULL;
  return h;
}

Embedding random_unit(int dim, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Embedding v(dim);
  for (int i = 0; i < dim; ++i) v[i] = n(rng);
  return v.normalized();
}

}  // namespace

MockScorer::MockScorer(Resolution input, std::uint64_t seed) : input_(input), seed_(seed) {
  if (input.width <= 0 || input.height <= 0) throw InvalidArgument("MockScorer: empty input resolution");
  const int dim = 3 * input.pixels();
  Rng rng(mix_seed(seed, 0x6d6f636b));
  perm_.resize(dim);
  std::iota(perm_.begin(), perm_.end(), 0);
  std::shuffle(perm_.begin(), perm_.end(), rng);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int offset = 0; offset < dim; offset += kBlockSize) {
    const int size = std::min(kBlockSize, dim - offset);
    Eigen::MatrixXd g(size, size);
    for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = n(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    blocks_.push_back(qr.householderQ() * Eigen::MatrixXd::Identity(size, size));
  }
  fallback_ = random_unit(dim, rng);
}

Eigen::VectorXd MockScorer::centered_features(const Image& image) const {
  const Image fitted = resize_bilinear(image, input_);
  if (fitted.channels() != 3) throw InvalidArgument("MockScorer: expected an RGB image");
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(fitted.data().data(), static_cast<Eigen::Index>(fitted.size()));
  x.array() -= x.mean();
  return x;
}

Eigen::VectorXd MockScorer::apply_map(const Eigen::VectorXd& features) const {
  Eigen::VectorXd permuted(features.size());
  for (Eigen::Index j = 0; j < permuted.size(); ++j) permuted[j] = features[perm_[j]];
  Eigen::VectorXd out(features.size());
  Eigen::Index offset = 0;
  for (const Eigen::MatrixXd& q : blocks_) {
    out.segment(offset, q.rows()) = q * permuted.segment(offset, q.rows());
    offset += q.rows();
  }
  return out;
}

Eigen::VectorXd MockScorer::apply_map_transpose(const Eigen::VectorXd& embedding) const {
  Eigen::VectorXd permuted(embedding.size());
  Eigen::Index offset = 0;
  for (const Eigen::MatrixXd& q : blocks_) {
    permuted.segment(offset, q.rows()) = q.transpose() * embedding.segment(offset, q.rows());
    offset += q.rows();
  }
  Eigen::VectorXd out(embedding.size());
  for (Eigen::Index j = 0; j < permuted.size(); ++j) out[perm_[j]] = permuted[j];
  return out;
}

Embedding MockScorer::embed_image(const Image& image) const {
  const Eigen::VectorXd y = apply_map(centered_features(image));
  const double norm = y.norm();
  if (norm < 1e-12) return fallback_;
  return y / norm;
}

Image MockScorer::embed_image_vjp(const Image& image, const Embedding& cotangent) const {
  if (cotangent.size() != dim()) throw InvalidArgument("MockScorer: cotangent dimension mismatch");
  const Eigen::VectorXd y = apply_map(centered_features(image));
  const double norm = y.norm();
  Image grad(input_, 3);
  if (norm >= 1e-12) {
    const Eigen::VectorXd e = y / norm;
    const Eigen::VectorXd g_y = (cotangent - e * e.dot(cotangent)) / norm;
    Eigen::VectorXd g_x = apply_map_transpose(g_y);
    g_x.array() -= g_x.mean();
    std::copy(g_x.data(), g_x.data() + g_x.size(), grad.data().begin());
  }
  return resize_bilinear_adjoint(grad, image.resolution());
}

void MockScorer::register_caption(const std::string& caption, const Image& target) {
  captions_[caption] = embed_image(target);
}

Embedding MockScorer::embed_text(std::string_view text) const {
  if (auto it = captions_.find(text); it != captions_.end()) return it->second;
  if (auto it = captions_.find(strip_directional_suffix(text)); it != captions_.end()) return it->second;
  Rng rng(mix_seed(seed_, fnv1a(text)));
  return random_unit(dim(), rng);
}

Image fit_to_scorer(const Image& image, const Scorer& scorer) {
  return resize_bilinear(image, scorer.input_resolution());
}

double similarity_loss(const Embedding& image_embedding, const Embedding& text_embedding) {
  if (image_embedding.size() != text_embedding.size()) throw InvalidArgument("similarity_loss: dimension mismatch");
  return -image_embedding.dot(text_embedding);
}

std::string directional_suffix(const CameraPose& pose, SceneType scene_type) {
  const ViewAngles a = view_angles(pose);
  if (a.elevation_deg < -60.0) return kDirectionalSuffixes[0];
  const double az = std::abs(a.azimuth_deg);
  if (az < 45.0) return kDirectionalSuffixes[1];
  if (az <= 135.0 || scene_type == SceneType::forward_facing) return kDirectionalSuffixes[2];
  return kDirectionalSuffixes[3];
}

std::string directional_prompt(const std::string& caption, const CameraPose& pose, SceneType scene_type) {
  if (caption.empty()) throw InvalidArgument("directional_prompt: empty caption");
  return caption + directional_suffix(pose, scene_type);
}

std::string_view strip_directional_suffix(std::string_view text) {
  for (const char* suffix : kDirectionalSuffixes) {
    const std::string_view s(suffix);
    if (text.size() >= s.size() && text.substr(text.size() - s.size()) == s) return text.substr(0, text.size() - s.size());
  }
  return text;
}

void LossConfig::validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) throw InvalidArgument("LossConfig: tau must be in (0, 1]");
  if (!(rho > 0.0)) throw InvalidArgument("LossConfig: rho must be positive");
  if (!(lambda_t >= 0.0 && lambda_d >= 0.0)) throw InvalidArgument("LossConfig: weights must be >= 0");
  if (!(ramp_start >= 0.0 && ramp_start <= ramp_end && ramp_end <= 1.0)) {
    throw InvalidArgument("LossConfig: need 0 <= ramp_start <= ramp_end <= 1");
  }
}

double transmittance_loss(double mean_transmittance, double tau) { return -std::min(tau, mean_transmittance); }

double transmittance_loss_derivative(double mean_transmittance, double tau) {
  return mean_transmittance <= tau ? -1.0 : 0.0;
}

namespace {

// Mean via an offset from the first value, so constant maps give an exact
// mean and an exactly zero variance.
double shifted_mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (double v : values) sum += v - values[0];
  return values[0] + sum / static_cast<double>(values.size());
}

}  // namespace

double population_variance(const Image& map) {
  const auto values = map.data();
  if (values.empty()) return 0.0;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double v : values) {
    sum += v - values[0];
    sum_sq += (v - values[0]) * (v - values[0]);
  }
  const double n = static_cast<double>(values.size());
  return std::max(0.0, (sum_sq - sum * sum / n) / n);
}

double depth_loss(const Image& disparity, double rho) { return -std::min(rho, population_variance(disparity)); }

Image depth_loss_gradient(const Image& disparity, double rho) {
  Image grad(disparity.resolution(), disparity.channels());
  if (population_variance(disparity) > rho) return grad;
  const double mean = shifted_mean(disparity.data());
  const double n = static_cast<double>(disparity.size());
  auto src = disparity.data();
  auto dst = grad.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = -2.0 * (src[i] - mean) / n;
  return grad;
}

LossWeights anneal_weights(int step, int total, const LossConfig& cfg) {
  if (step < 0 || total < 0 || step > total) throw InvalidArgument("anneal_weights: need 0 <= step <= total");
  const double frac = total > 0 ? static_cast<double>(step) / total : 1.0;
  double ramp = 1.0;
  if (frac <= cfg.ramp_start) {
    ramp = cfg.ramp_end > cfg.ramp_start || frac < cfg.ramp_start ? 0.0 : 1.0;
  } else if (frac < cfg.ramp_end) {
    ramp = (frac - cfg.ramp_start) / (cfg.ramp_end - cfg.ramp_start);
  }
  return {ramp * cfg.lambda_t, ramp * cfg.lambda_d};
}

double total_loss(double l_sim, double l_t, double l_d, const LossWeights& weights) {
  return l_sim + weights.lambda_t * l_t + weights.lambda_d * l_d;
}

}  // namespace roiblend

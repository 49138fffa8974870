// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#include "roiblend/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace roiblend {

namespace {

double clamped_cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0);
}

std::vector<Embedding> embed_all(const Scorer& scorer, const std::vector<Image>& frames) {
  std::vector<Embedding> out(frames.size());
  parallel_for(static_cast<int>(frames.size()), [&](int i) { out[i] = scorer.embed_image(frames[i]); });
  return out;
}

}  // namespace

double direction_similarity(const Scorer& scorer, const Image& original_image, const Image& edited_image,
                            const std::string& original_text, const std::string& edited_text) {
  const Eigen::VectorXd dt = scorer.embed_text(edited_text) - scorer.embed_text(original_text);
  const Eigen::VectorXd di = scorer.embed_image(edited_image) - scorer.embed_image(original_image);
  if (dt.norm() <= kMinDeltaNorm) throw MetricError("direction_similarity: text embeddings do not change");
  if (di.norm() <= kMinDeltaNorm) throw MetricError("direction_similarity: image embeddings do not change");
  return clamped_cosine(dt, di);
}

ConsistencyResult direction_consistency(const Scorer& scorer, const std::vector<Image>& original_frames,
                                        const std::vector<Image>& edited_frames) {
  if (original_frames.size() != edited_frames.size()) {
    throw InvalidArgument("direction_consistency: sequences differ in length");
  }
  if (original_frames.size() < 2) throw InvalidArgument("direction_consistency: need at least two frames");
  const std::vector<Embedding> eo = embed_all(scorer, original_frames);
  const std::vector<Embedding> ee = embed_all(scorer, edited_frames);
  ConsistencyResult result;
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < eo.size(); ++i) {
    const Eigen::VectorXd a = eo[i + 1] - eo[i];
    const Eigen::VectorXd b = ee[i + 1] - ee[i];
    if (a.norm() <= kMinDeltaNorm || b.norm() <= kMinDeltaNorm) {
      ++result.pairs_excluded;
      continue;
    }
    sum += clamped_cosine(a, b);
    ++result.pairs_used;
  }
  if (result.pairs_used == 0) throw MetricError("direction_consistency: every frame pair is degenerate");
  result.score = sum / result.pairs_used;
  return result;
}

double r_precision(const Scorer& scorer, const std::vector<Image>& renders,
                   const std::vector<std::string>& true_captions, const std::vector<std::string>& caption_pool) {
  if (caption_pool.empty()) throw MetricError("r_precision: empty caption pool");
  if (renders.size() != true_captions.size()) throw InvalidArgument("r_precision: one true caption per render");
  if (renders.empty()) throw InvalidArgument("r_precision: no renders");
  std::vector<Embedding> text(caption_pool.size());
  for (std::size_t j = 0; j < caption_pool.size(); ++j) text[j] = scorer.embed_text(caption_pool[j]);
  const std::vector<Embedding> images = embed_all(scorer, renders);
  int hits = 0;
  for (std::size_t i = 0; i < renders.size(); ++i) {
    const auto truth = std::find(caption_pool.begin(), caption_pool.end(), true_captions[i]);
    if (truth == caption_pool.end()) throw InvalidArgument("r_precision: true caption missing from pool");
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < text.size(); ++j) {
      const double s = images[i].dot(text[j]);
      if (s > best_score) {
        best_score = s;
        best = j;
      }
    }
    if (best == static_cast<std::size_t>(truth - caption_pool.begin())) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(renders.size());
}

std::vector<std::uint8_t> roi_pixel_mask(const RoiBox& box, const CameraPose& pose, Resolution res) {
  std::vector<std::uint8_t> mask(res.pixels(), 0);
  for (int y = 0; y < res.height; ++y) {
    for (int x = 0; x < res.width; ++x) {
      const Ray ray = pose.pixel_ray(x, y, res, 0.0, std::numeric_limits<double>::max());
      mask[y * res.width + x] = ray_box_intersect(ray, box).has_value();
    }
  }
  return mask;
}

double masked_background_mad(const Image& original, const Image& edited, const std::vector<std::uint8_t>& roi_mask) {
  if (original.resolution() != edited.resolution() || original.channels() != edited.channels()) {
    throw InvalidArgument("masked_background_mad: image shapes differ");
  }
  if (roi_mask.size() != static_cast<std::size_t>(original.resolution().pixels())) {
    throw InvalidArgument("masked_background_mad: mask size mismatch");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < original.height(); ++y) {
    for (int x = 0; x < original.width(); ++x) {
      if (roi_mask[y * original.width() + x]) continue;
      for (int c = 0; c < original.channels(); ++c) sum += std::abs(original(x, y, c) - edited(x, y, c));
      count += original.channels();
    }
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

}  // namespace roiblend

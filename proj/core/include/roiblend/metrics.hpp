// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "roiblend/geometry.hpp"
#include "roiblend/guidance.hpp"

namespace roiblend {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kMinDeltaNorm = 1e-9;

double direction_similarity(const Scorer& scorer, const Image& original_image, const Image& edited_image,
                            const std::string& original_text, const std::string& edited_text);

struct ConsistencyResult {
  double score = 0.0;
  int pairs_used = 0;
  int pairs_excluded = 0;
};

ConsistencyResult direction_consistency(const Scorer& scorer, const std::vector<Image>& original_frames,
                                        const std::vector<Image>& edited_frames);

double r_precision(const Scorer& scorer, const std::vector<Image>& renders,
                   const std::vector<std::string>& true_captions, const std::vector<std::string>& caption_pool);

// Pixels whose camera ray crosses the box.
std::vector<std::uint8_t> roi_pixel_mask(const RoiBox& box, const CameraPose& pose, Resolution res);

// Mean absolute RGB difference over pixels outside the mask.
double masked_background_mad(const Image& original, const Image& edited, const std::vector<std::uint8_t>& roi_mask);

}  // namespace roiblend

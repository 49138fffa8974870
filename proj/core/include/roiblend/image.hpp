// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "roiblend/common.hpp"

namespace roiblend {

// Row-major, interleaved-channel image of doubles. Maps (disparity, depth,
// transmittance) are single-channel images.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, double fill = 0.0);
  Image(Resolution res, int channels, double fill = 0.0) : Image(res.width, res.height, channels, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  Resolution resolution() const { return {width_, height_}; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  double operator()(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  Vec3 rgb(int x, int y) const;
  void set_rgb(int x, int y, const Vec3& value);

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  double mean() const;

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

// Bilinear resampling with half-pixel centers and edge clamping.
Image resize_bilinear(const Image& src, Resolution dst);

// Adjoint of resize_bilinear: maps a cotangent on the resized image back to
// a cotangent on the source image of resolution `src`.
Image resize_bilinear_adjoint(const Image& grad_dst, Resolution src);

}  // namespace roiblend

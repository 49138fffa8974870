// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#include "roiblend/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace roiblend {

Image::Image(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  if (width < 0 || height < 0 || channels <= 0) throw InvalidArgument("Image: invalid dimensions");
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Vec3 Image::rgb(int x, int y) const {
  const std::size_t i = index(x, y, 0);
  return {data_[i], data_[i + 1], data_[i + 2]};
}

void Image::set_rgb(int x, int y, const Vec3& value) {
  const std::size_t i = index(x, y, 0);
  data_[i] = value.x();
  data_[i + 1] = value.y();
  data_[i + 2] = value.z();
}

double Image::mean() const {
  if (data_.empty()) return 0.0;
  return std::accumulate(data_.begin(), data_.end(), 0.0) / static_cast<double>(data_.size());
}

namespace {

struct Tap {
  int i0, i1;
  double w0, w1;
};

// Source taps for destination coordinate `d` (half-pixel centers).
Tap source_tap(int d, int dst_size, int src_size) {
  const double scale = static_cast<double>(src_size) / dst_size;
  double s = (d + 0.5) * scale - 0.5;
  s = std::clamp(s, 0.0, static_cast<double>(src_size - 1));
  const int i0 = static_cast<int>(std::floor(s));
  const int i1 = std::min(i0 + 1, src_size - 1);
  const double f = s - i0;
  return {i0, i1, 1.0 - f, f};
}

}  // namespace

Image resize_bilinear(const Image& src, Resolution dst) {
  if (dst.width <= 0 || dst.height <= 0) throw InvalidArgument("resize_bilinear: empty target");
  if (src.resolution() == dst) return src;
  Image out(dst, src.channels());
  for (int y = 0; y < dst.height; ++y) {
    const Tap ty = source_tap(y, dst.height, src.height());
    for (int x = 0; x < dst.width; ++x) {
      const Tap tx = source_tap(x, dst.width, src.width());
      for (int c = 0; c < src.channels(); ++c) {
        out(x, y, c) = ty.w0 * (tx.w0 * src(tx.i0, ty.i0, c) + tx.w1 * src(tx.i1, ty.i0, c)) +
                       ty.w1 * (tx.w0 * src(tx.i0, ty.i1, c) + tx.w1 * src(tx.i1, ty.i1, c));
      }
    }
  }
  return out;
}

Image resize_bilinear_adjoint(const Image& grad_dst, Resolution src) {
  if (grad_dst.resolution() == src) return grad_dst;
  Image out(src, grad_dst.channels());
  for (int y = 0; y < grad_dst.height(); ++y) {
    const Tap ty = source_tap(y, grad_dst.height(), src.height);
    for (int x = 0; x < grad_dst.width(); ++x) {
      const Tap tx = source_tap(x, grad_dst.width(), src.width);
      for (int c = 0; c < grad_dst.channels(); ++c) {
        const double g = grad_dst(x, y, c);
        out(tx.i0, ty.i0, c) += ty.w0 * tx.w0 * g;
        out(tx.i1, ty.i0, c) += ty.w0 * tx.w1 * g;
        out(tx.i0, ty.i1, c) += ty.w1 * tx.w0 * g;
        out(tx.i1, ty.i1, c) += ty.w1 * tx.w1 * g;
      }
    }
  }
  return out;
}

}  // namespace roiblend

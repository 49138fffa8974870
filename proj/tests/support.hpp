// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <memory>

#include "roiblend/fields.hpp"
#include "roiblend/geometry.hpp"
#include "roiblend/image.hpp"

namespace roiblend::testing {

// Same field as scenes/checker_table.
inline AnalyticField checker_table() {
  return AnalyticField::checker(Vec3(0.0, -0.25, 0.0), Vec3(3.0, 0.5, 3.0), 0.5, 10.0, Vec3(1.5, 0.8, 0.2),
                                Vec3(-0.5, -1.0, -1.5));
}

inline RoiBox example_box() { return RoiBox(Vec3(0.0, 0.5, 0.0), Vec3(1.0, 1.0, 1.0)); }

inline CameraPose default_camera() {
  return CameraPose::look_at(Vec3(0.0, 1.5, 4.0), Vec3::Zero(), Vec3::UnitY(), 60.0 * std::acos(-1.0) / 180.0);
}

// Red disc of radius 0.3 * width on white.
inline Image red_disc(Resolution res) {
  Image img(res, 3, 1.0);
  const double cx = 0.5 * res.width;
  const double cy = 0.5 * res.height;
  const double r = 0.3 * res.width;
  for (int y = 0; y < res.height; ++y) {
    for (int x = 0; x < res.width; ++x) {
      if (std::hypot(x + 0.5 - cx, y + 0.5 - cy) < r) img.set_rgb(x, y, Vec3(1.0, 0.0, 0.0));
    }
  }
  return img;
}

// The wrapped field inside the box, empty space outside.
class BoxMaskedField final : public RadianceField {
 public:
  BoxMaskedField(const RadianceField& inner, const RoiBox& box) : inner_(inner), box_(box) {}

  using RadianceField::eval;
  FieldBatch eval(const Eigen::Matrix3Xd& positions, const Eigen::Matrix3Xd& directions) const override {
    FieldBatch out = inner_.eval(positions, directions);
    for (Eigen::Index i = 0; i < positions.cols(); ++i) {
      if (!box_.contains(positions.col(i), 1e-9)) {
        out.raw_density[i] = kEmptyRawDensity;
        out.raw_color.col(i).setZero();
      }
    }
    return out;
  }
  std::unique_ptr<RadianceField> clone() const override { return std::make_unique<BoxMaskedField>(inner_, box_); }

 private:
  const RadianceField& inner_;
  RoiBox box_;
};

inline double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

inline Vec3 random_unit(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Vec3(n(rng), n(rng), n(rng)).normalized();
}

}  // namespace roiblend::testing

// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "roiblend/common.hpp"

namespace roiblend {

enum class DensityActivation { relu, softplus };

double activate_density(DensityActivation phi, double raw);
double activate_density_derivative(DensityActivation phi, double raw);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string to_string(DensityActivation phi);
DensityActivation density_activation_from_string(const std::string& name);

// Sinusoidal encoding: for each input scalar emits cos(2^l x), sin(2^l x) for
// l = 0..L-1, interleaved in that order.
std::vector<double> positional_encode(std::span<const double> x, int frequencies);
std::vector<double> positional_encode(double x, int frequencies);

// Pre-activation field output.
struct FieldSample {
  double raw_density = 0.0;
  Vec3 raw_color = Vec3::Zero();
};

// Batched field output, one column per query.
struct FieldBatch {
  Eigen::VectorXd raw_density;
  Eigen::Matrix3Xd raw_color;

  Eigen::Index size() const { return raw_density.size(); }
  FieldSample sample(Eigen::Index i) const { return {raw_density[i], raw_color.col(i)}; }
};

// Radiance field: (position, unit direction) -> pre-activation density and color.
class RadianceField {
 public:
  virtual ~RadianceField() = default;

  virtual FieldBatch eval(const Eigen::Matrix3Xd& positions, const Eigen::Matrix3Xd& directions) const = 0;
  virtual std::unique_ptr<RadianceField> clone() const = 0;
  virtual bool trainable() const { return false; }

  FieldSample eval(const Vec3& position, const Vec3& direction) const;
};

// Raw density reported outside an analytic field's support.
inline constexpr double kEmptyRawDensity = -1.0e4;

// Closed-form fields used as test scenes and oracles.
class AnalyticField final : public RadianceField {
 public:
  enum class Kind { uniform_sphere, uniform_box, checker };

  struct Params {
    Kind kind = Kind::uniform_sphere;
    Vec3 center = Vec3::Zero();
    double radius = 1.0;                 // uniform_sphere
    Vec3 dims = Vec3::Constant(2.0);     // uniform_box, checker
    double raw_density = 5.0;
    Vec3 raw_color = Vec3::Zero();
    Vec3 alt_raw_color = Vec3::Zero();   // checker odd cells
    double cell_size = 0.5;              // checker
  };

  static AnalyticField uniform_sphere(const Vec3& center, double radius, double raw_density, const Vec3& raw_color);
  static AnalyticField uniform_box(const Vec3& center, const Vec3& dims, double raw_density, const Vec3& raw_color);
  static AnalyticField checker(const Vec3& center, const Vec3& dims, double cell_size, double raw_density,
                               const Vec3& raw_color, const Vec3& alt_raw_color);

  explicit AnalyticField(const Params& params);

  const Params& params() const { return params_; }
  bool inside(const Vec3& p) const;
  FieldSample at(const Vec3& p) const;

  using RadianceField::eval;
  FieldBatch eval(const Eigen::Matrix3Xd& positions, const Eigen::Matrix3Xd& directions) const override;
  std::unique_ptr<RadianceField> clone() const override;

 private:
  Params params_;
};

std::string to_string(AnalyticField::Kind kind);
AnalyticField::Kind analytic_kind_from_string(const std::string& name);

}  // namespace roiblend

// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#include "roiblend/fields.hpp"

#include <cmath>

namespace roiblend {

double activate_density(DensityActivation phi, double raw) {
  switch (phi) {
    case DensityActivation::relu:
      return raw > 0.0 ? raw : 0.0;
    case DensityActivation::softplus:
      return raw > 30.0 ? raw : std::log1p(std::exp(raw));
  }
  return 0.0;
}

double activate_density_derivative(DensityActivation phi, double raw) {
  switch (phi) {
    case DensityActivation::relu:
      return raw > 0.0 ? 1.0 : 0.0;
    case DensityActivation::softplus:
      return sigmoid(raw);
  }
  return 0.0;
}

std::string to_string(DensityActivation phi) { return phi == DensityActivation::relu ? "relu" : "softplus"; }

DensityActivation density_activation_from_string(const std::string& name) {
  if (name == "relu") return DensityActivation::relu;
  if (name == "softplus") return DensityActivation::softplus;
  throw InvalidArgument("unknown density activation: " + name);
}

std::vector<double> positional_encode(std::span<const double> x, int frequencies) {
  if (frequencies < 0) throw InvalidArgument("positional_encode: negative frequency count");
  std::vector<double> out;
  out.reserve(x.size() * 2 * frequencies);
  for (double v : x) {
    double scale = 1.0;
    for (int l = 0; l < frequencies; ++l, scale *= 2.0) {
      out.push_back(std::cos(scale * v));
      out.push_back(std::sin(scale * v));
    }
  }
  return out;
}

std::vector<double> positional_encode(double x, int frequencies) {
  return positional_encode(std::span<const double>(&x, 1), frequencies);
}

FieldSample RadianceField::eval(const Vec3& position, const Vec3& direction) const {
  if (!position.allFinite() || !direction.allFinite()) throw InvalidArgument("field eval: non-finite input");
  const FieldBatch batch = eval(Eigen::Matrix3Xd(position), Eigen::Matrix3Xd(direction));
  return batch.sample(0);
}

AnalyticField::AnalyticField(const Params& params) : params_(params) {
  if (params.kind == Kind::uniform_sphere && !(params.radius > 0.0)) {
    throw InvalidArgument("AnalyticField: sphere radius must be positive");
  }
  if (params.kind != Kind::uniform_sphere && (params.dims.array() <= 0.0).any()) {
    throw InvalidArgument("AnalyticField: box dims must be positive");
  }
  if (params.kind == Kind::checker && !(params.cell_size > 0.0)) {
    throw InvalidArgument("AnalyticField: checker cell size must be positive");
  }
}

AnalyticField AnalyticField::uniform_sphere(const Vec3& center, double radius, double raw_density,
                                            const Vec3& raw_color) {
  Params p;
  p.kind = Kind::uniform_sphere;
  p.center = center;
  p.radius = radius;
  p.raw_density = raw_density;
  p.raw_color = raw_color;
  return AnalyticField(p);
}

AnalyticField AnalyticField::uniform_box(const Vec3& center, const Vec3& dims, double raw_density,
                                         const Vec3& raw_color) {
  Params p;
  p.kind = Kind::uniform_box;
  p.center = center;
  p.dims = dims;
  p.raw_density = raw_density;
  p.raw_color = raw_color;
  return AnalyticField(p);
}

AnalyticField AnalyticField::checker(const Vec3& center, const Vec3& dims, double cell_size, double raw_density,
                                     const Vec3& raw_color, const Vec3& alt_raw_color) {
  Params p;
  p.kind = Kind::checker;
  p.center = center;
  p.dims = dims;
  p.cell_size = cell_size;
  p.raw_density = raw_density;
  p.raw_color = raw_color;
  p.alt_raw_color = alt_raw_color;
  return AnalyticField(p);
}

bool AnalyticField::inside(const Vec3& p) const {
  if (params_.kind == Kind::uniform_sphere) return (p - params_.center).squaredNorm() <= params_.radius * params_.radius;
  return ((p - params_.center).cwiseAbs().array() <= 0.5 * params_.dims.array()).all();
}

FieldSample AnalyticField::at(const Vec3& p) const {
  if (!inside(p)) return {kEmptyRawDensity, Vec3::Zero()};
  if (params_.kind != Kind::checker) return {params_.raw_density, params_.raw_color};
  const Vec3 local = (p - (params_.center - 0.5 * params_.dims)) / params_.cell_size;
  const long parity = static_cast<long>(std::floor(local.x())) + static_cast<long>(std::floor(local.y())) +
                      static_cast<long>(std::floor(local.z()));
  return {params_.raw_density, (parity & 1) ? params_.alt_raw_color : params_.raw_color};
}

FieldBatch AnalyticField::eval(const Eigen::Matrix3Xd& positions, const Eigen::Matrix3Xd& /*directions*/) const {
  FieldBatch out{Eigen::VectorXd(positions.cols()), Eigen::Matrix3Xd(3, positions.cols())};
  for (Eigen::Index i = 0; i < positions.cols(); ++i) {
    const FieldSample s = at(positions.col(i));
    out.raw_density[i] = s.raw_density;
    out.raw_color.col(i) = s.raw_color;
  }
  return out;
}

std::unique_ptr<RadianceField> AnalyticField::clone() const { return std::make_unique<AnalyticField>(*this); }

std::string to_string(AnalyticField::Kind kind) {
  switch (kind) {
    case AnalyticField::Kind::uniform_sphere:
      return "uniform-sphere";
    case AnalyticField::Kind::uniform_box:
      return "uniform-box";
    case AnalyticField::Kind::checker:
      return "checker";
  }
  return "";
}

AnalyticField::Kind analytic_kind_from_string(const std::string& name) {
  if (name == "uniform-sphere") return AnalyticField::Kind::uniform_sphere;
  if (name == "uniform-box") return AnalyticField::Kind::uniform_box;
  if (name == "checker") return AnalyticField::Kind::checker;
  throw InvalidArgument("unknown analytic field kind: " + name);
}

}  // namespace roiblend

// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#include "roiblend/mlp_field.hpp"

#include <cmath>
#include <cstring>

namespace roiblend {

namespace {

using MatMap = Eigen::Map<Eigen::MatrixXd>;
using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

// Rows follow positional_encode: for each coordinate, for each frequency, cos then sin.
Eigen::MatrixXd encode_batch(const Eigen::Matrix3Xd& x, int frequencies) {
  Eigen::MatrixXd out(3 * 2 * frequencies, x.cols());
  for (int k = 0; k < 3; ++k) {
    double scale = 1.0;
    for (int l = 0; l < frequencies; ++l, scale *= 2.0) {
      const Eigen::Index row = k * 2 * frequencies + 2 * l;
      out.row(row) = (scale * x.row(k)).array().cos();
      out.row(row + 1) = (scale * x.row(k)).array().sin();
    }
  }
  return out;
}

}  // namespace

void MlpArchitecture::validate() const {
  if (depth < 1 || width < 1) throw InvalidArgument("MlpArchitecture: depth and width must be >= 1");
  if (pos_frequencies < 1 || dir_frequencies < 0) throw InvalidArgument("MlpArchitecture: bad encoding frequencies");
}

std::vector<ParamBlock> MlpField::layout(const MlpArchitecture& arch, Eigen::Index* total) {
  std::vector<ParamBlock> blocks;
  Eigen::Index offset = 0;
  auto add = [&](std::string name, int rows, int cols, bool color) {
    ParamBlock b{std::move(name), offset, offset + static_cast<Eigen::Index>(rows) * cols, rows, cols, color};
    offset = b.end();
    blocks.push_back(std::move(b));
  };
  for (int k = 0; k < arch.depth; ++k) {
    add("trunk_" + std::to_string(k), arch.width, k == 0 ? arch.pos_features() : arch.width, false);
  }
  add("density", 1, arch.width, false);
  add("feature", arch.width, arch.width, true);
  add("color_hidden", arch.color_hidden(), arch.width + arch.dir_features(), true);
  add("color_out", 3, arch.color_hidden(), true);
  *total = offset;
  return blocks;
}

MlpField::MlpField(const MlpArchitecture& arch, Eigen::VectorXd params) : arch_(arch), params_(std::move(params)) {
  arch.validate();
  Eigen::Index total = 0;
  blocks_ = layout(arch, &total);
  if (params_.size() != total) throw InvalidArgument("MlpField: parameter count does not match architecture");
  if (!params_.allFinite()) throw InvalidArgument("MlpField: non-finite parameters");
}

MlpField MlpField::initialize(const MlpArchitecture& arch, std::uint64_t seed) {
  arch.validate();
  Eigen::Index total = 0;
  const auto blocks = layout(arch, &total);
  Eigen::VectorXd params(total);
  Rng rng(mix_seed(seed, 0x6d6c70));
  for (const ParamBlock& b : blocks) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(b.cols));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = b.weight_offset; i < b.end(); ++i) {
      params[i] = static_cast<double>(static_cast<float>(u(rng)));
    }
  }
  return MlpField(arch, std::move(params));
}

FieldBatch MlpField::eval(const Eigen::Matrix3Xd& positions, const Eigen::Matrix3Xd& directions) const {
  return forward(positions, directions, nullptr);
}

std::unique_ptr<RadianceField> MlpField::clone() const { return std::make_unique<MlpField>(clone_field(*this)); }

FieldBatch MlpField::forward(const Eigen::Matrix3Xd& positions, const Eigen::Matrix3Xd& directions,
                             MlpCache* cache) const {
  if (positions.cols() != directions.cols()) throw InvalidArgument("MlpField: batch size mismatch");
  if (!positions.allFinite() || !directions.allFinite()) throw InvalidArgument("MlpField: non-finite input");
  const double* p = params_.data();
  auto weight = [&](const ParamBlock& b) { return ConstMatMap(p + b.weight_offset, b.rows, b.cols); };
  auto bias = [&](const ParamBlock& b) { return ConstVecMap(p + b.bias_offset, b.rows); };

  MlpCache local;
  MlpCache& c = cache ? *cache : local;
  c.pos_encoding = encode_batch(positions, arch_.pos_frequencies);
  c.dir_encoding = encode_batch(directions, arch_.dir_frequencies);
  c.trunk.resize(arch_.depth);

  const Eigen::MatrixXd* h = &c.pos_encoding;
  for (int k = 0; k < arch_.depth; ++k) {
    const ParamBlock& b = blocks_[k];
    c.trunk[k].noalias() = weight(b) * *h;
    c.trunk[k].colwise() += bias(b);
    c.trunk[k] = c.trunk[k].cwiseMax(0.0);
    h = &c.trunk[k];
  }

  const ParamBlock& bd = blocks_[arch_.depth];
  const ParamBlock& bf = blocks_[arch_.depth + 1];
  const ParamBlock& bc = blocks_[arch_.depth + 2];
  const ParamBlock& bo = blocks_[arch_.depth + 3];

  FieldBatch out;
  out.raw_density = (weight(bd) * *h).transpose();
  out.raw_density.array() += p[bd.bias_offset];

  c.feature.noalias() = weight(bf) * *h;
  c.feature.colwise() += bias(bf);

  const auto wc = weight(bc);
  c.color_hidden.noalias() = wc.leftCols(arch_.width) * c.feature;
  if (arch_.dir_features() > 0) c.color_hidden.noalias() += wc.rightCols(arch_.dir_features()) * c.dir_encoding;
  c.color_hidden.colwise() += bias(bc);
  c.color_hidden = c.color_hidden.cwiseMax(0.0);

  out.raw_color.noalias() = weight(bo) * c.color_hidden;
  out.raw_color.colwise() += Eigen::Vector3d(bias(bo));
  return out;
}

void MlpField::backward(const MlpCache& c, const Eigen::VectorXd& d_raw_density, const Eigen::Matrix3Xd& d_raw_color,
                        Eigen::VectorXd& grad) const {
  if (grad.size() != params_.size()) throw InvalidArgument("MlpField::backward: gradient size mismatch");
  const double* p = params_.data();
  double* g = grad.data();
  auto weight = [&](const ParamBlock& b) { return ConstMatMap(p + b.weight_offset, b.rows, b.cols); };
  auto gweight = [&](const ParamBlock& b) { return MatMap(g + b.weight_offset, b.rows, b.cols); };
  auto gbias = [&](const ParamBlock& b) { return VecMap(g + b.bias_offset, b.rows); };

  const ParamBlock& bd = blocks_[arch_.depth];
  const ParamBlock& bf = blocks_[arch_.depth + 1];
  const ParamBlock& bc = blocks_[arch_.depth + 2];
  const ParamBlock& bo = blocks_[arch_.depth + 3];
  const Eigen::MatrixXd& h_last = c.trunk.back();

  gweight(bo).noalias() += d_raw_color * c.color_hidden.transpose();
  gbias(bo) += d_raw_color.rowwise().sum();
  Eigen::MatrixXd d_hidden = weight(bo).transpose() * d_raw_color;
  d_hidden = d_hidden.cwiseProduct((c.color_hidden.array() > 0.0).cast<double>().matrix());

  auto gwc = gweight(bc);
  gwc.leftCols(arch_.width).noalias() += d_hidden * c.feature.transpose();
  if (arch_.dir_features() > 0) gwc.rightCols(arch_.dir_features()).noalias() += d_hidden * c.dir_encoding.transpose();
  gbias(bc) += d_hidden.rowwise().sum();
  const Eigen::MatrixXd d_feature = weight(bc).leftCols(arch_.width).transpose() * d_hidden;

  gweight(bf).noalias() += d_feature * h_last.transpose();
  gbias(bf) += d_feature.rowwise().sum();
  Eigen::MatrixXd dh = weight(bf).transpose() * d_feature;

  gweight(bd).noalias() += d_raw_density.transpose() * h_last.transpose();
  g[bd.bias_offset] += d_raw_density.sum();
  dh.noalias() += weight(bd).transpose() * d_raw_density.transpose();

  for (int k = arch_.depth - 1; k >= 0; --k) {
    const ParamBlock& b = blocks_[k];
    const Eigen::MatrixXd dz = dh.cwiseProduct((c.trunk[k].array() > 0.0).cast<double>().matrix());
    const Eigen::MatrixXd& input = k == 0 ? c.pos_encoding : c.trunk[k - 1];
    gweight(b).noalias() += dz * input.transpose();
    gbias(b) += dz.rowwise().sum();
    if (k > 0) dh = weight(b).transpose() * dz;
  }
}

std::uint64_t MlpField::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (Eigen::Index i = 0; i < params_.size(); ++i) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &params_[i], sizeof(bits));
    h = (h ^ bits) * 1099511628211ULL;
  }
  return h;
}

MlpField clone_field(const MlpField& source) { return MlpField(source.architecture(), Eigen::VectorXd(source.params())); }

ParameterMask freeze_density_layers(const MlpField& field) {
  ParameterMask mask(static_cast<std::size_t>(field.param_count()), 0);
  for (const ParamBlock& b : field.blocks()) {
    if (!b.color_branch) continue;
    for (Eigen::Index i = b.weight_offset; i < b.end(); ++i) mask[i] = 1;
  }
  return mask;
}

ParameterMask all_trainable(const MlpField& field) {
  return ParameterMask(static_cast<std::size_t>(field.param_count()), 1);
}

FieldBatch field_eval_with_gradient(const RadianceField& field, const Eigen::Matrix3Xd& positions,
                                    const Eigen::Matrix3Xd& directions, const Eigen::VectorXd& d_raw_density,
                                    const Eigen::Matrix3Xd& d_raw_color, Eigen::VectorXd& grad) {
  const auto* mlp = dynamic_cast<const MlpField*>(&field);
  if (mlp == nullptr) throw InvalidArgument("field_eval_with_gradient: field is not trainable");
  if (d_raw_density.size() != positions.cols() || d_raw_color.cols() != positions.cols()) {
    throw InvalidArgument("field_eval_with_gradient: cotangent batch size mismatch");
  }
  MlpCache cache;
  FieldBatch out = mlp->forward(positions, directions, &cache);
  mlp->backward(cache, d_raw_density, d_raw_color, grad);
  return out;
}

}  // namespace roiblend

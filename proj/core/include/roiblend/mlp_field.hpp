// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "roiblend/fields.hpp"

namespace roiblend {

// NeRF-shaped network:
//   trunk:    depth x (Linear + ReLU) over the encoded position
//   density:  Linear(width -> 1)
//   feature:  Linear(width -> width)
//   color:    Linear(width + enc(dir) -> width/2) + ReLU, Linear(width/2 -> 3)
struct MlpArchitecture {
  int depth = 4;
  int width = 64;
  int pos_frequencies = 10;
  int dir_frequencies = 4;

  int pos_features() const { return 3 * 2 * pos_frequencies; }
  int dir_features() const { return 3 * 2 * dir_frequencies; }
  int color_hidden() const { return width / 2 > 0 ? width / 2 : 1; }

  void validate() const;
  bool operator==(const MlpArchitecture&) const = default;
};

// Contiguous block of the flat parameter vector.
struct ParamBlock {
  std::string name;
  Eigen::Index weight_offset = 0;  // rows x cols, column-major
  Eigen::Index bias_offset = 0;
  int rows = 0;
  int cols = 0;
  bool color_branch = false;

  Eigen::Index end() const { return bias_offset + rows; }
};

// Per-parameter trainability; true = updated by the optimizer.
using ParameterMask = std::vector<std::uint8_t>;

// Intermediate activations kept for the backward pass.
struct MlpCache {
  Eigen::MatrixXd pos_encoding;
  Eigen::MatrixXd dir_encoding;
  std::vector<Eigen::MatrixXd> trunk;  // post-ReLU activations
  Eigen::MatrixXd feature;
  Eigen::MatrixXd color_hidden;        // post-ReLU
};

class MlpField final : public RadianceField {
 public:
  // Uniform fan-in initialization, deterministic in `seed`.
  static MlpField initialize(const MlpArchitecture& arch, std::uint64_t seed);

  MlpField(const MlpArchitecture& arch, Eigen::VectorXd params);

  const MlpArchitecture& architecture() const { return arch_; }
  const Eigen::VectorXd& params() const { return params_; }
  Eigen::VectorXd& mutable_params() { return params_; }
  Eigen::Index param_count() const { return params_.size(); }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }

  using RadianceField::eval;
  FieldBatch eval(const Eigen::Matrix3Xd& positions, const Eigen::Matrix3Xd& directions) const override;
  std::unique_ptr<RadianceField> clone() const override;
  bool trainable() const override { return true; }

  FieldBatch forward(const Eigen::Matrix3Xd& positions, const Eigen::Matrix3Xd& directions, MlpCache* cache) const;

  // Accumulates d(sum <cotangent, output>)/d(params) into `grad`.
  void backward(const MlpCache& cache, const Eigen::VectorXd& d_raw_density, const Eigen::Matrix3Xd& d_raw_color,
                Eigen::VectorXd& grad) const;

  // Order-independent checksum of the parameter bits.
  std::uint64_t checksum() const;

 private:
  static std::vector<ParamBlock> layout(const MlpArchitecture& arch, Eigen::Index* total);

  MlpArchitecture arch_;
  std::vector<ParamBlock> blocks_;
  Eigen::VectorXd params_;
};

// Deep copy; the clone shares no storage with `source`.
MlpField clone_field(const MlpField& source);

// Trunk and density head frozen, feature and color layers trainable.
ParameterMask freeze_density_layers(const MlpField& field);

ParameterMask all_trainable(const MlpField& field);

// Field outputs plus parameter gradient accumulation. Throws for fields that
// are not trainable.
FieldBatch field_eval_with_gradient(const RadianceField& field, const Eigen::Matrix3Xd& positions,
                                    const Eigen::Matrix3Xd& directions, const Eigen::VectorXd& d_raw_density,
                                    const Eigen::Matrix3Xd& d_raw_color, Eigen::VectorXd& grad);

}  // namespace roiblend

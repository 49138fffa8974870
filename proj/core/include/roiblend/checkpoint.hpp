// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

// Field checkpoint container, little-endian throughout:
//
//   offset  size  content
//   0       8     magic "RBFIELD\0"
//   8       4     u32 format version (1)
//   12      4     u32 header length H
//   16      H     UTF-8 JSON header (architecture descriptor, metadata)
//   16+H    8     u64 parameter count N
//   24+H    4N    N x f32 parameters (flat, MlpField::blocks() order)
//
// Analytic fields store their closed-form parameters in the header with N = 0.
// Training-state files use magic "RBSTATE\0" and the same layout, with 3N
// floats: parameters, first moments, second moments.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "json.hpp"

#include "roiblend/fields.hpp"
#include "roiblend/mlp_field.hpp"
#include "roiblend/trainer.hpp"

namespace roiblend {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

nlohmann::json field_descriptor(const RadianceField& field);

std::vector<std::uint8_t> encode_field(const RadianceField& field, const nlohmann::json& metadata = {});
std::unique_ptr<RadianceField> decode_field(const std::vector<std::uint8_t>& bytes, nlohmann::json* metadata = nullptr);

void save_field(const std::filesystem::path& path, const RadianceField& field, const nlohmann::json& metadata = {});
std::unique_ptr<RadianceField> load_field(const std::filesystem::path& path, nlohmann::json* metadata = nullptr);

// Builds a field from a JSON descriptor ({"kind": "analytic", ...}); MLP
// descriptors need parameters and are only accepted via checkpoints.
std::unique_ptr<RadianceField> field_from_descriptor(const nlohmann::json& descriptor);

void save_train_state(const std::filesystem::path& path, const TrainState& state);
TrainState load_train_state(const std::filesystem::path& path);

}  // namespace roiblend

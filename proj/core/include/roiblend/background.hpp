// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "roiblend/image.hpp"

namespace roiblend {

enum class BackgroundKind { white, black, gaussian_noise, checkerboard, fourier_texture };

std::string to_string(BackgroundKind kind);
BackgroundKind background_kind_from_string(const std::string& name);

struct BackgroundSpec {
  BackgroundKind kind = BackgroundKind::black;
  std::uint64_t seed = 0;
  double noise_mean = 0.5;
  double noise_std = 0.25;
  int cell_px = 8;
  int fourier_waves = 8;
  double fourier_max_cycles = 16.0;  // per image width
};

// H x W x 3 image in [0, 1], deterministic in spec.seed.
Image make_background(const BackgroundSpec& spec, Resolution res);

}  // namespace roiblend

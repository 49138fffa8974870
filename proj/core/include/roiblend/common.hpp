// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace roiblend {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Rng = std::mt19937_64;

struct Resolution {
  int width = 0;
  int height = 0;

  int pixels() const { return width * height; }
  bool operator==(const Resolution&) const = default;
};

// Precondition violations on public entry points.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Derives an independent, reproducible stream seed from a base seed and a
// stream index (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) { return Rng(mix_seed(seed, stream)); }

// Runs body(i) for i in [0, count). Work items are independent; callers that
// reduce results do so by index afterwards so output never depends on the
// thread count.
void parallel_for(int count, const std::function<void(int)>& body);

}  // namespace roiblend

// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#include "roiblend/background.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace roiblend {

std::string to_string(BackgroundKind kind) {
  switch (kind) {
    case BackgroundKind::white:
      return "white";
    case BackgroundKind::black:
      return "black";
    case BackgroundKind::gaussian_noise:
      return "gaussian-noise";
    case BackgroundKind::checkerboard:
      return "checkerboard";
    case BackgroundKind::fourier_texture:
      return "fourier-texture";
  }
  return "";
}

BackgroundKind background_kind_from_string(const std::string& name) {
  for (auto kind : {BackgroundKind::white, BackgroundKind::black, BackgroundKind::gaussian_noise,
                    BackgroundKind::checkerboard, BackgroundKind::fourier_texture}) {
    if (to_string(kind) == name) return kind;
  }
  throw InvalidArgument("unknown background kind: " + name);
}

namespace {

Image fourier_texture(const BackgroundSpec& spec, Resolution res, Rng& rng) {
  std::uniform_real_distribution<double> freq(-spec.fourier_max_cycles, spec.fourier_max_cycles);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> amplitude(0.5, 1.0);
  Image out(res, 3);
  for (int c = 0; c < 3; ++c) {
    struct Wave {
      double fx, fy, phase, amplitude;
    };
    std::vector<Wave> waves;
    while (static_cast<int>(waves.size()) < spec.fourier_waves) {
      const double fx = freq(rng);
      const double fy = freq(rng);
      if (std::hypot(fx, fy) > spec.fourier_max_cycles) continue;
      waves.push_back({fx, fy, phase(rng), amplitude(rng)});
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int y = 0; y < res.height; ++y) {
      for (int x = 0; x < res.width; ++x) {
        const double u = (x + 0.5) / res.width;
        const double v = (y + 0.5) / res.width;
        double sum = 0.0;
        for (const Wave& w : waves) sum += w.amplitude * std::sin(2.0 * std::numbers::pi * (w.fx * u + w.fy * v) + w.phase);
        out(x, y, c) = sum;
        lo = std::min(lo, sum);
        hi = std::max(hi, sum);
      }
    }
    for (int y = 0; y < res.height; ++y) {
      for (int x = 0; x < res.width; ++x) {
        out(x, y, c) = hi > lo ? (out(x, y, c) - lo) / (hi - lo) : 0.5;
      }
    }
  }
  return out;
}

}  // namespace

Image make_background(const BackgroundSpec& spec, Resolution res) {
  if (res.width <= 0 || res.height <= 0) throw InvalidArgument("make_background: empty resolution");
  Rng rng(mix_seed(spec.seed, 0x6267));
  switch (spec.kind) {
    case BackgroundKind::white:
      return Image(res, 3, 1.0);
    case BackgroundKind::black:
      return Image(res, 3, 0.0);
    case BackgroundKind::gaussian_noise: {
      std::normal_distribution<double> noise(spec.noise_mean, spec.noise_std);
      Image out(res, 3);
      for (double& v : out.data()) v = std::clamp(noise(rng), 0.0, 1.0);
      return out;
    }
    case BackgroundKind::checkerboard: {
      if (spec.cell_px <= 0) throw InvalidArgument("make_background: checkerboard cell must be positive");
      std::uniform_real_distribution<double> dark(0.0, 0.4);
      std::uniform_real_distribution<double> light(0.6, 1.0);
      const Vec3 a(dark(rng), dark(rng), dark(rng));
      const Vec3 b(light(rng), light(rng), light(rng));
      Image out(res, 3);
      for (int y = 0; y < res.height; ++y) {
        for (int x = 0; x < res.width; ++x) {
          out.set_rgb(x, y, ((x / spec.cell_px + y / spec.cell_px) & 1) ? b : a);
        }
      }
      return out;
    }
    case BackgroundKind::fourier_texture:
      return fourier_texture(spec, res, rng);
  }
  return Image(res, 3);
}

}  // namespace roiblend

// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "roiblend/image.hpp"

namespace roiblend {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 8-bit RGB PNG; values are clamped to [0, 1] and rounded.
std::vector<std::uint8_t> encode_png_rgb8(const Image& rgb);
void write_png_rgb8(const std::filesystem::path& path, const Image& rgb);

// 16-bit grayscale PNG of a single-channel map; value v maps to
// round(65535 * clamp(v / scale, 0, 1)). Non-finite values map to 65535.
std::vector<std::uint8_t> encode_png_gray16(const Image& map, double scale);
void write_png_gray16(const std::filesystem::path& path, const Image& map, double scale);

// Raw little-endian f32, row-major, no header; the dimensions are those of
// the accompanying PNG.
std::vector<std::uint8_t> encode_f32_sidecar(const Image& map);
void write_f32_sidecar(const std::filesystem::path& path, const Image& map);

// Decodes any 8/16-bit PNG to an RGB image in [0, 1].
Image decode_png_rgb(const std::vector<std::uint8_t>& bytes);
Image read_png_rgb(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

}  // namespace roiblend

// Copyright 2026 The roiblend Authors
// SPDX-License-Identifier: Apache-2.0
#include "roiblend/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace roiblend {

namespace {

std::vector<std::uint8_t> write_png(png_image& image, const void* pixels) {
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels, 0, nullptr)) {
    throw ImageIoError(std::string("png encode failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels, 0, nullptr)) {
    throw ImageIoError(std::string("png encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

png_image make_header(const Image& img, png_uint_32 format) {
  if (img.empty()) throw ImageIoError("cannot encode an empty image");
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = format;
  return image;
}

}  // namespace

std::vector<std::uint8_t> encode_png_rgb8(const Image& rgb) {
  if (rgb.channels() != 3) throw ImageIoError("encode_png_rgb8: expected 3 channels");
  png_image image = make_header(rgb, PNG_FORMAT_RGB);
  std::vector<std::uint8_t> pixels(rgb.size());
  std::transform(rgb.data().begin(), rgb.data().end(), pixels.begin(), [](double v) {
    return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0)));
  });
  return write_png(image, pixels.data());
}

void write_png_rgb8(const std::filesystem::path& path, const Image& rgb) {
  write_file_bytes(path, encode_png_rgb8(rgb));
}

std::vector<std::uint8_t> encode_png_gray16(const Image& map, double scale) {
  if (map.channels() != 1) throw ImageIoError("encode_png_gray16: expected 1 channel");
  if (!(scale > 0.0)) throw ImageIoError("encode_png_gray16: scale must be positive");
  png_image image = make_header(map, PNG_FORMAT_LINEAR_Y);
  std::vector<png_uint_16> pixels(map.size());
  std::transform(map.data().begin(), map.data().end(), pixels.begin(), [scale](double v) {
    if (!std::isfinite(v)) return static_cast<png_uint_16>(65535);
    return static_cast<png_uint_16>(std::lround(65535.0 * std::clamp(v / scale, 0.0, 1.0)));
  });
  return write_png(image, pixels.data());
}

void write_png_gray16(const std::filesystem::path& path, const Image& map, double scale) {
  write_file_bytes(path, encode_png_gray16(map, scale));
}

std::vector<std::uint8_t> encode_f32_sidecar(const Image& map) {
  std::vector<std::uint8_t> out(map.size() * sizeof(float));
  for (std::size_t i = 0; i < map.size(); ++i) {
    const float v = static_cast<float>(map.data()[i]);
    std::memcpy(out.data() + i * sizeof(float), &v, sizeof(float));
  }
  return out;
}

void write_f32_sidecar(const std::filesystem::path& path, const Image& map) {
  write_file_bytes(path, encode_f32_sidecar(map));
}

Image decode_png_rgb(const std::vector<std::uint8_t>& bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw ImageIoError(std::string("png decode failed: ") + image.message);
  }
  Image out(static_cast<int>(image.width), static_cast<int>(image.height), 3);
  // 16-bit files are linear to libpng; reading them as 8-bit would apply the
  // sRGB curve, so they are read back at full depth without conversion.
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    image.format = PNG_FORMAT_LINEAR_RGB;
    std::vector<std::uint16_t> pixels(PNG_IMAGE_SIZE(image) / 2);
    if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
      png_image_free(&image);
      throw ImageIoError(std::string("png decode failed: ") + image.message);
    }
    std::transform(pixels.begin(), pixels.end(), out.data().begin(), [](std::uint16_t v) { return v / 65535.0; });
    return out;
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw ImageIoError(std::string("png decode failed: ") + image.message);
  }
  std::transform(pixels.begin(), pixels.end(), out.data().begin(), [](std::uint8_t v) { return v / 255.0; });
  return out;
}

Image read_png_rgb(const std::filesystem::path& path) { return decode_png_rgb(read_file_bytes(path)); }

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ImageIoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageIoError("short write to " + path.string());
}

namespace {

constexpr char kBase64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

}  // namespace

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    const std::uint32_t n = (bytes[i] << 16) | (i + 1 < bytes.size() ? bytes[i + 1] << 8 : 0) |
                            (i + 2 < bytes.size() ? bytes[i + 2] : 0);
    out += kBase64[(n >> 18) & 63];
    out += kBase64[(n >> 12) & 63];
    out += i + 1 < bytes.size() ? kBase64[(n >> 6) & 63] : '=';
    out += i + 2 < bytes.size() ? kBase64[n & 63] : '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
  std::array<int, 256> lookup;
  lookup.fill(-1);
  for (int i = 0; i < 64; ++i) lookup[static_cast<unsigned char>(kBase64[i])] = i;
  if (text.size() % 4 != 0) throw ImageIoError("base64: length is not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t n = 0;
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      int v = 0;
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        ++pad;
      } else {
        if (pad) throw ImageIoError("base64: data after padding");
        v = lookup[static_cast<unsigned char>(c)];
        if (v < 0) throw ImageIoError("base64: invalid character");
      }
      n = (n << 6) | static_cast<std::uint32_t>(v);
    }
    out.push_back(static_cast<std::uint8_t>(n >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(n >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(n));
  }
  return out;
}

}  // namespace roiblend

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "aerodet/geometry.hpp"

namespace aerodet {

/// 8-bit raster, interleaved channels (1 = gray, 3 = RGB), row-major.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, int c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), pixels(static_cast<std::size_t>(w) * h * c, fill) {}

  std::size_t index(int x, int y, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  std::uint8_t& at(int x, int y, int c = 0) noexcept { return pixels[index(x, y, c)]; }
  std::uint8_t at(int x, int y, int c = 0) const noexcept { return pixels[index(x, y, c)]; }
  ImageDims dims() const noexcept { return {double(width), double(height)}; }
  bool empty() const noexcept { return pixels.empty(); }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Reads PNG (8/16-bit gray, gray+alpha, RGB, RGBA, palette) or binary/ASCII PGM/PPM.
/// Alpha channels are dropped; 16-bit samples are reduced to 8 bits.
Image read_image(const std::filesystem::path& path);

/// Writes by extension: .png, .pgm (1 channel), .ppm (3 channels).
void write_image(const Image& image, const std::filesystem::path& path);

/// Reads width/height from a PNG, JPEG or PNM header without decoding pixels.
std::optional<ImageDims> probe_image_size(const std::filesystem::path& path);

}  // namespace aerodet

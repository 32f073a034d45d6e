#pragma once

#include "ssmcodec/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace ssmc {

/// 8-bit interleaved image, 1 (gray) or 3 (RGB) channels.
struct Image {
  Index height = 0;
  Index width = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;

  friend bool operator==(const Image&, const Image&) = default;
};

enum class ImageFormat { kPng, kPpm };

/// Reads PNG or binary PPM (P6) / PGM (P5); detected from the file contents.
/// The result is always RGB.
Image read_image(const std::filesystem::path& path);
Image decode_image_bytes(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_pnm(const Image& image);  // P6 for RGB, P5 for gray
std::vector<std::uint8_t> encode_png(const Image& image);
void write_image(const std::filesystem::path& path, const Image& image, ImageFormat format);

/// Values scaled to [0, 1].
Tensorf to_tensor(const Image& image);
/// Clamps to [0, 1] and rounds to 8 bits.
Image to_image(const Tensorf& tensor);

/// Deterministic RGB test pattern: colour gradients plus seeded noise,
/// computed with integer arithmetic only.
Image synthetic_image(Index height, Index width, std::uint64_t seed);

}  // namespace ssmc

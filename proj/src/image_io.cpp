#include "ssmcodec/image_io.hpp"

#include "ssmcodec/bytes.hpp"
#include "ssmcodec/weights.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <random>
#include <string>

namespace ssmc {

namespace {

bool is_png(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return bytes.size() >= 8 && std::memcmp(bytes.data(), kSig, 8) == 0;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw FormatError(std::string("png: ") + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  Image img{static_cast<Index>(png.height), static_cast<Index>(png.width), 3, {}};
  img.pixels.resize(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw FormatError("png: " + msg);
  }
  return img;
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::size_t pnm_token(std::span<const std::uint8_t> b, std::size_t& pos) {
  while (pos < b.size()) {
    if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else if (std::isspace(b[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::size_t value = 0, digits = 0;
  while (pos < b.size() && std::isdigit(b[pos])) {
    value = value * 10 + static_cast<std::size_t>(b[pos++] - '0');
    if (++digits > 9) throw FormatError("pnm: header value too large");
  }
  if (digits == 0) throw FormatError("pnm: malformed header");
  return value;
}

Image decode_pnm(std::span<const std::uint8_t> bytes) {
  const bool rgb = bytes[1] == '6';
  std::size_t pos = 2;
  const auto width = pnm_token(bytes, pos);
  const auto height = pnm_token(bytes, pos);
  const auto maxval = pnm_token(bytes, pos);
  if (maxval != 255) throw FormatError("pnm: only 8-bit files (maxval 255) are supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("pnm: malformed header");
  ++pos;
  const int in_channels = rgb ? 3 : 1;
  const std::size_t need = width * height * static_cast<std::size_t>(in_channels);
  if (bytes.size() - pos < need) throw FormatError("pnm: truncated pixel data");
  Image img{static_cast<Index>(height), static_cast<Index>(width), 3, {}};
  img.pixels.resize(width * height * 3);
  for (std::size_t i = 0; i < width * height; ++i)
    for (int c = 0; c < 3; ++c) img.pixels[i * 3 + static_cast<std::size_t>(c)] = bytes[pos + (rgb ? i * 3 + static_cast<std::size_t>(c) : i)];
  return img;
}

void check_image(const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw FormatError("image: channel count must be 1 or 3");
  if (image.pixels.size() != static_cast<std::size_t>(image.height * image.width * image.channels)) {
    throw FormatError("image: pixel buffer does not match extents");
  }
}

}  // namespace

Image decode_image_bytes(std::span<const std::uint8_t> bytes) {
  if (is_png(bytes)) return decode_png(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '6' || bytes[1] == '5')) return decode_pnm(bytes);
  throw FormatError("image: unrecognized format (expected PNG or binary PPM/PGM)");
}

Image read_image(const std::filesystem::path& path) {
  try {
    return decode_image_bytes(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_pnm(const Image& image) {
  check_image(image);
  ByteWriter w;
  w.text((image.channels == 3 ? "P6\n" : "P5\n") + std::to_string(image.width) + " " + std::to_string(image.height) +
         "\n255\n");
  w.bytes(image.pixels);
  return w.release();
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  check_image(image);
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
    throw FormatError(std::string("png: ") + png.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
    throw FormatError(std::string("png: ") + png.message);
  }
  out.resize(size);
  return out;
}

void write_image(const std::filesystem::path& path, const Image& image, ImageFormat format) {
  write_file(path, format == ImageFormat::kPng ? encode_png(image) : encode_pnm(image));
}

Tensorf to_tensor(const Image& image) {
  check_image(image);
  Tensorf t({image.height, image.width, image.channels});
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<float>(image.pixels[static_cast<std::size_t>(i)]) / 255.0f;
  return t;
}

Image to_image(const Tensorf& tensor) {
  if (tensor.rank() != 3 || (tensor.channels() != 1 && tensor.channels() != 3)) {
    throw ShapeError("to_image: expected H x W x 1 or H x W x 3, got " + shape_string(tensor.shape()));
  }
  Image img{tensor.height(), tensor.width(), static_cast<int>(tensor.channels()), {}};
  img.pixels.resize(static_cast<std::size_t>(tensor.size()));
  for (Index i = 0; i < tensor.size(); ++i) {
    const float v = std::isnan(tensor[i]) ? 0.0f : std::clamp(tensor[i], 0.0f, 1.0f);
    img.pixels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  return img;
}

Image synthetic_image(Index height, Index width, std::uint64_t seed) {
  if (height < 1 || width < 1) throw FormatError("synthetic image: extents must be positive");
  std::mt19937_64 rng(seed);
  Image img{height, width, 3, std::vector<std::uint8_t>(static_cast<std::size_t>(height * width * 3))};
  std::size_t i = 0;
  for (Index r = 0; r < height; ++r) {
    for (Index c = 0; c < width; ++c) {
      const Index gx = c * 255 / std::max<Index>(1, width - 1), gy = r * 255 / std::max<Index>(1, height - 1);
      const Index base[3] = {gx, gy, (gx + gy) / 2};
      for (const Index b : base) {
        const auto noise = static_cast<Index>(rng() >> 58) - 32;
        img.pixels[i++] = static_cast<std::uint8_t>(std::clamp<Index>(b + noise, 0, 255));
      }
    }
  }
  return img;
}

}  // namespace ssmc

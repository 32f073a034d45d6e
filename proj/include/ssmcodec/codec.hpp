#pragma once

#include "ssmcodec/bytes.hpp"
#include "ssmcodec/model.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace ssmc {

class CodecError : public FormatError {
 public:
  using FormatError::FormatError;
};

struct CropRecord {
  Index height = 0;
  Index width = 0;
};

struct PaddedImage {
  Tensorf image;
  CropRecord crop;
};

/// Mirror-pads H x W x C to the next multiples of `multiple` (edge samples
/// repeated, extended periodically when the pad exceeds the extent).
PaddedImage pad(const Tensorf& image, Index multiple = TransformConfig::kTotalStride);
Tensorf unpad(const Tensorf& padded, const CropRecord& crop);

/// Container layout (little-endian):
///   "SSMC"  u16 version  u32 height  u32 width  u32 model_id  u8 lambda_index
///   u8 slice_count  u32 z_length + z bytes  slice_count x (u32 length + bytes)
struct Bitstream {
  static constexpr std::uint16_t kVersion = 1;
  static constexpr std::size_t kHeaderBytes = 4 + 2 + 4 + 4 + 4 + 1 + 1;

  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t model_id = 0;
  std::uint8_t lambda_index = 0;
  std::vector<std::uint8_t> z_stream;
  std::vector<std::vector<std::uint8_t>> y_streams;

  std::vector<std::uint8_t> serialize() const;
  static Bitstream parse(std::span<const std::uint8_t> bytes);

  std::size_t payload_bytes() const;
  std::size_t total_bytes() const { return kHeaderBytes + 4 * (1 + y_streams.size()) + payload_bytes(); }

  friend bool operator==(const Bitstream&, const Bitstream&) = default;
};

struct EncodeResult {
  Bitstream stream;
  LatentBundle latents;
  double estimated_bits_z = 0.0;
  double estimated_bits_y = 0.0;
  std::size_t saturated = 0;
};

struct DecodeResult {
  Tensorf image;  // H x W x 3 in [0, 1]
  LatentBundle latents;
};

/// image: H x W x 3 with values in [0, 1].
EncodeResult encode_image(const Tensorf& image, const CodecModel& model, int lambda_index);
DecodeResult decode_image(const Bitstream& stream, const CodecModel& model);

}  // namespace ssmc

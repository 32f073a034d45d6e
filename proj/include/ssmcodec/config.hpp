#pragma once

#include "ssmcodec/tensor.hpp"

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace ssmc {

/// Architecture of the four transforms and the slice networks.
///
/// g_a:  4 stride-2 convolutions (3 -> C1 -> C2 -> C3 -> C4), each followed
///       by a VSS block of L1..L4 layers. Latent width M = C4.
/// h_a:  2 stride-2 convolutions (C4 -> C5 -> C6), each followed by a VSS
///       block of `hyper_layers` layers.
/// h_s:  mirror of h_a with transposed convolutions back to C5 channels,
///       then 1x1 heads producing the initial mean and scale (M each).
/// g_s:  mirror of g_a (VSS block, then transposed convolution).
struct TransformConfig {
  std::string name = "desk";
  std::array<Index, 6> channels{64, 64, 64, 80, 64, 48};
  std::array<Index, 4> layers{2, 2, 9, 2};
  Index hyper_layers = 2;
  Index state_dim = 4;
  Index expansion = 2;
  Index dw_kernel = 3;
  Index conv_kernel = 3;
  Index slices = 5;
  Index cam_hidden = 64;
  bool tied_directions = false;

  Index latent_channels() const { return channels[3]; }
  Index hyper_channels() const { return channels[5]; }
  Index slice_channels() const { return latent_channels() / slices; }
  /// Total downsampling of g_a followed by h_a.
  static constexpr Index kTotalStride = 64;
  static constexpr Index kLatentStride = 16;

  void validate() const;

  /// Stable `key=value` text form; the canonical model description.
  std::string to_text() const;
  static TransformConfig from_text(std::string_view text);

  /// "paper", "desk" or "tiny".
  static TransformConfig preset(std::string_view name);
  static std::vector<std::string> preset_names();

  friend bool operator==(const TransformConfig&, const TransformConfig&) = default;
};

}  // namespace ssmc

#pragma once

#include "ssmcodec/config.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ssmc {

/// Analytic multiply-accumulate counts. They count the dominant products of
/// each operator and ignore normalization and activations.
std::uint64_t conv_macs(Index out_height, Index out_width, Index in_channels, Index out_channels, Index kernel);
std::uint64_t dense_macs(Index tokens, Index in_channels, Index out_channels);

/// Four-direction selective scan of `tokens` tokens at width `hidden`:
/// 4 * tokens * (E(R + 2N) + R E + 3 E N).
std::uint64_t scan_stage_macs(Index tokens, Index hidden, Index state_dim, Index dt_rank);

/// One VSS layer (projections, depthwise convolution and the scan stage).
std::uint64_t vss_layer_macs(const TransformConfig& config, Index tokens, Index channels);

struct StageOps {
  std::string stage;
  std::uint64_t scan_macs = 0;
  std::uint64_t other_macs = 0;

  std::uint64_t total() const { return scan_macs + other_macs; }
};

struct OpsEstimate {
  Index height = 0;  // padded input size
  Index width = 0;
  std::vector<StageOps> stages;  // g_a, h_a, h_s, cam, g_s

  std::uint64_t scan_macs() const;
  std::uint64_t total_macs() const;
};

/// Estimate for coding an H x W image; the size is first rounded up to the
/// padding multiple.
OpsEstimate estimate_ops(const TransformConfig& config, Index height, Index width);

}  // namespace ssmc

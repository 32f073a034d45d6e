#pragma once

#include "ssmcodec/config.hpp"
#include "ssmcodec/entropy.hpp"
#include "ssmcodec/nn.hpp"
#include "ssmcodec/vss.hpp"
#include "ssmcodec/weights.hpp"

#include <span>
#include <vector>

namespace ssmc {

struct ConvLayer {
  Tensorf weight;
  Tensorf bias;
  ConvSpec spec;

  Tensorf forward(const Tensorf& x) const {
    return spec.direction == ConvDirection::kDown ? conv2d(x, weight, bias, spec)
                                                  : conv_transpose2d(x, weight, bias, spec);
  }
};

/// 1x1 convolution, i.e. a token-wise affine map.
struct DenseLayer {
  RowMatrix<float> weight;  // C_in x C_out
  Vector<float> bias;

  Tensorf forward(const Tensorf& x) const { return linear<float>(x, weight, bias); }
};

struct VssBlock {
  VssBlockConfig config;
  std::vector<VssLayerWeights<float>> layers;

  Tensorf forward(const Tensorf& x, ScanAlgorithm algorithm) const {
    return vss_block_forward<float>(x, config, layers, algorithm);
  }
};

/// Initial mean and scale predicted from the hyper-latent.
struct HyperOutput {
  Tensorf mean;
  Tensorf scale;
};

struct SliceParams {
  Tensorf mean;
  Tensorf scale;
};

/// Everything the encoder knows about one image's latents.
struct LatentBundle {
  Tensorf y, y_hat, y_bar;
  Tensorf z, z_hat;
  Tensorf mean, scale;              // per-slice (mu_i, sigma_i), concatenated over slices
  HyperOutput hyper;                // (mu~, sigma~)
  std::vector<std::int32_t> z_symbols;
  std::vector<std::vector<std::int32_t>> y_symbols;  // one vector per slice
};

/// Output of one slice network evaluation.
struct CamSlice {
  SliceParams params;
  Tensorf y_hat;
  Tensorf residual;
  Tensorf y_bar;
  SymbolBlock symbols;
};

/// The analysis/synthesis transforms, hyper transforms, slice networks and
/// entropy models of one weight set.
class CodecModel {
 public:
  explicit CodecModel(const WeightStore& store, ScanAlgorithm algorithm = ScanAlgorithm::kSequential);

  const TransformConfig& config() const { return config_; }
  std::uint32_t fingerprint() const { return fingerprint_; }

  /// y = g_a(x): H x W x 3 -> H/16 x W/16 x M.
  Tensorf analysis(const Tensorf& x) const;
  /// z = h_a(y): h x w x M -> h/4 x w/4 x C6.
  Tensorf hyper_analysis(const Tensorf& y) const;
  /// (mu~, sigma~) = h_s(z_hat), sigma~ >= kScaleMin.
  HyperOutput hyper_synthesis(const Tensorf& z_hat) const;
  /// x_hat = g_s(y_bar), not clamped.
  Tensorf synthesis(const Tensorf& y_bar) const;

  /// (mu_i, sigma_i) from (mu~, sigma~, y_bar_0 .. y_bar_{i-1}).
  SliceParams slice_params(Index slice, const HyperOutput& hyper, std::span<const Tensorf> previous) const;
  /// r_i from (mu~, sigma~, y_bar_0 .. y_bar_{i-1}, y_hat_i).
  Tensorf slice_residual(Index slice, const HyperOutput& hyper, std::span<const Tensorf> previous,
                         const Tensorf& y_hat) const;

  const FactorizedPrior& hyper_prior() const { return prior_; }
  const GaussianConditional& conditional() const { return gaussian_; }

 private:
  struct Stage {
    ConvLayer conv;
    VssBlock block;
  };
  struct SliceNet {
    DenseLayer params0, params1, residual0, residual1;
  };

  Tensorf slice_context(const HyperOutput& hyper, std::span<const Tensorf> previous, const Tensorf* extra) const;

  TransformConfig config_;
  std::uint32_t fingerprint_ = 0;
  ScanAlgorithm algorithm_;
  std::vector<Stage> g_a_, h_a_, g_s_, h_s_;  // g_s_/h_s_ stages run block first, then conv
  DenseLayer h_s_mean_, h_s_scale_;
  std::vector<SliceNet> slices_;
  FactorizedPrior prior_;
  GaussianConditional gaussian_;
};

/// One step of the channel-wise autoregressive model: predicts (mu_i, sigma_i),
/// quantizes y_i on the mu_i lattice, and forms y_bar_i = y_hat_i + r_i.
CamSlice cam_slice(const CodecModel& model, Index slice, const HyperOutput& hyper,
                   std::span<const Tensorf> previous, const Tensorf& y_i);

/// Decoder-side counterpart of cam_slice given the decoded lattice symbols.
CamSlice cam_slice_decode(const CodecModel& model, Index slice, const HyperOutput& hyper,
                          std::span<const Tensorf> previous, std::span<const std::int32_t> symbols);

}  // namespace ssmc

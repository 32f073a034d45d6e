#pragma once

#include "ssmcodec/range_coder.hpp"
#include "ssmcodec/tensor.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace ssmc {

/// Coded symbols live on the integer lattice [-255, 255]; values outside are
/// saturated to the nearest end.
inline constexpr std::int32_t kSymbolMin = -255;
inline constexpr std::int32_t kSymbolMax = 255;
inline constexpr int kAlphabetSize = kSymbolMax - kSymbolMin + 1;

/// Lower bound on every predicted scale.
inline constexpr double kScaleMin = 0.11;
inline constexpr double kScaleTableMax = 256.0;
inline constexpr int kScaleLevels = 64;

inline constexpr std::array<double, 5> kLambdaLadder{0.0035, 0.0067, 0.013, 0.025, 0.05};

/// round(v) with ties away from zero.
inline float round_half_away(float v) { return std::round(v); }

/// v_hat = round(v - mu) + mu elementwise.
Tensorf quantize(const Tensorf& v, const Tensorf& mu);

struct SymbolBlock {
  std::vector<std::int32_t> symbols;
  std::size_t saturated = 0;  // values clipped into [kSymbolMin, kSymbolMax]
};

/// Lattice coordinates round(v - mu), saturated to the coder alphabet. With
/// an empty mu the offset is zero.
SymbolBlock quantize_symbols(const Tensorf& v, const Tensorf* mu = nullptr);

/// mu + k for each symbol k.
Tensorf dequantize(std::span<const std::int32_t> symbols, const Tensorf& mu);

/// Standard normal CDF.
double normal_cdf(double x);

/// Mass of the unit-width bin centred on k under N(mu, sigma^2).
double gaussian_bin_mass(double k, double mu, double sigma);

/// Float pmf over the alphabet -> strictly positive 16-bit frequencies that
/// sum to 2^16 (one count reserved per symbol, the rest by largest remainder).
std::vector<std::uint32_t> quantize_pmf(std::span<const double> pmf);

/// Conditional Gaussian model for y_hat - mu: one coder table per entry of a
/// fixed log-spaced scale grid from kScaleMin to kScaleTableMax.
class GaussianConditional {
 public:
  GaussianConditional();

  const std::vector<double>& scales() const { return scales_; }
  const std::vector<CdfTable>& tables() const { return tables_; }

  /// Index of the first grid scale >= sigma (the last one for larger sigma).
  std::int32_t scale_index(double sigma) const;
  std::vector<std::int32_t> scale_indexes(const Tensorf& sigma) const;

  /// pmf of table `index` over the alphabet, tails folded into the end bins.
  std::vector<double> pmf(std::int32_t index) const;

 private:
  std::vector<double> scales_;
  std::vector<CdfTable> tables_;
};

/// Per-channel univariate density for the hyper-latent. Each channel's CDF is
///   c(x) = sigmoid(f_4(f_3(f_2(f_1(x))))),
///   f_k(x) = softplus(H_k) x + b_k, followed for k < 4 by x + tanh(a_k) * tanh(x),
/// with layer widths 1 -> 3 -> 3 -> 3 -> 1.
class FactorizedPrior {
 public:
  static constexpr std::array<Index, 5> kFilters{1, 3, 3, 3, 1};
  static constexpr int kLayers = 4;

  struct Channel {
    std::array<Eigen::MatrixXd, kLayers> matrices;      // out x in
    std::array<Eigen::VectorXd, kLayers> biases;        // out
    std::array<Eigen::VectorXd, kLayers - 1> factors;   // out
  };

  FactorizedPrior() = default;
  explicit FactorizedPrior(std::vector<Channel> channels);

  Index channels() const { return static_cast<Index>(channels_.size()); }
  const Channel& channel(Index c) const { return channels_.at(static_cast<std::size_t>(c)); }

  /// Pre-sigmoid CDF value of channel c at x.
  double logits(Index c, double x) const;
  double cdf(Index c, double x) const;
  /// c(k + 1/2) - c(k - 1/2), evaluated without cancellation in the upper tail.
  double bin_mass(Index c, double k) const;

  /// pmf over the alphabet with the tails folded into the end bins.
  std::vector<double> pmf(Index c) const;
  const std::vector<CdfTable>& tables() const { return tables_; }

 private:
  std::vector<Channel> channels_;
  std::vector<std::array<Eigen::MatrixXd, kLayers>> weights_;      // softplus(H_k)
  std::vector<std::array<Eigen::VectorXd, kLayers - 1>> gates_;    // tanh(a_k)
  std::vector<CdfTable> tables_;
};

/// Sum of -log2(mass).
double estimate_bits(std::span<const double> masses);

/// Sum of -log2(freq / 2^16) under the coder tables.
double estimate_bits(std::span<const std::int32_t> symbols, std::span<const std::int32_t> indexes,
                     std::span<const CdfTable> tables);

/// lambda * 255^2 * MSE(x, x_hat) + (bits_y + bits_z) / pixels, x in [0, 1].
double rd_loss(const Tensorf& x, const Tensorf& x_hat, double bits_y, double bits_z, double lambda,
               double pixel_count);

}  // namespace ssmc

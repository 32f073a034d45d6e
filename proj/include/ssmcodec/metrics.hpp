#pragma once

#include "ssmcodec/image_io.hpp"
#include "ssmcodec/tensor.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace ssmc {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Returned by the psnr functions for identical inputs.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(255^2 / mse); kPsnrIdentical when mse == 0.
double psnr_from_mse(double mse);

/// PSNR of two 8-bit images of equal size.
double psnr(const Image& reference, const Image& distorted);

/// PSNR of two maps with values in [0, 1], measured on the 8-bit scale.
double psnr(const Tensorf& reference, const Tensorf& distorted);

struct RdPoint {
  double bpp = 0;
  double psnr = 0;
};

/// Bjontegaard delta rate of `test` against `anchor`, in percent. Negative
/// values mean `test` needs fewer bits for the same quality. Each curve needs
/// at least four points with distinct PSNR, rate increasing with PSNR.
double bd_rate(std::span<const RdPoint> anchor, std::span<const RdPoint> test);

/// Normalized latent (y - mu) / sigma, in double.
Tensor<double> normalize_latent(const Tensorf& y, const Tensorf& mean, const Tensorf& scale);

/// Mean normalized cross-correlation along the channel axis between spatial
/// positions p and p + (di, dj), for |di|, |dj| <= max_offset.
struct CorrelationMap {
  Index max_offset = 0;
  Eigen::MatrixXd values;               // (2K+1) x (2K+1), centre at (K, K)
  Eigen::Matrix<std::int64_t, -1, -1> samples;

  double at(Index di, Index dj) const { return values(di + max_offset, dj + max_offset); }
  std::int64_t samples_at(Index di, Index dj) const { return samples(di + max_offset, dj + max_offset); }
};

/// Accumulates correlation statistics over any number of latents; the
/// reduction order is the order of add() calls.
class CorrelationAccumulator {
 public:
  explicit CorrelationAccumulator(Index max_offset);

  void add(const Tensor<double>& normalized);
  CorrelationMap result() const;

 private:
  Index max_offset_;
  Eigen::MatrixXd sums_;
  Eigen::Matrix<std::int64_t, -1, -1> counts_;
};

CorrelationMap latent_correlation(const Tensorf& y, const Tensorf& mean, const Tensorf& scale, Index max_offset);

inline constexpr int kKlBins = 201;
inline constexpr double kKlRange = 6.0;
inline constexpr double kKlEpsilon = 1e-12;

/// KL(empirical || standard normal) in nats over `bins` equal bins on
/// [-6, 6]. Samples outside the range are ignored.
double kl_to_standard_normal(std::span<const double> samples, int bins = kKlBins);

struct DeviationMap {
  Eigen::MatrixXd map;  // H x W, mean over channels of |y - y_hat|
  double mean = 0;
};

DeviationMap quantize_deviation(const Tensorf& y, const Tensorf& y_hat);

/// Binary PGM of a map scaled so its minimum is 0 and maximum 255.
std::vector<std::uint8_t> map_to_pgm(const Eigen::MatrixXd& map);

}  // namespace ssmc

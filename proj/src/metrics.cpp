#include "ssmcodec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ssmc {

namespace {

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) throw MetricError(std::string(what) + ": shape " + shape_string(a) + " vs " + shape_string(b));
}

// Natural cubic spline through (x_i, y_i), x strictly increasing.
class NaturalSpline {
 public:
  NaturalSpline(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    m_.assign(n, 0.0);
    if (n < 3) return;
    // Thomas algorithm on the interior second-derivative system.
    std::vector<double> diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
      diag[i] = 2.0 * (h0 + h1);
      upper[i] = h1;
      rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
      if (i > 1) {
        const double w = h0 / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
      }
    }
    for (std::size_t i = n - 2; i >= 1; --i) {
      m_[i] = (rhs[i] - upper[i] * m_[i + 1]) / diag[i];
      if (i == 1) break;
    }
  }

  /// Exact integral over [lo, hi], both inside [x_0, x_{n-1}].
  double integrate(double lo, double hi) const {
    double total = 0;
    for (std::size_t i = 0; i + 1 < x_.size(); ++i) {
      const double a = std::max(lo, x_[i]), b = std::min(hi, x_[i + 1]);
      if (b <= a) continue;
      total += antiderivative(i, b - x_[i]) - antiderivative(i, a - x_[i]);
    }
    return total;
  }

 private:
  // Integral from x_i to x_i + t of the cubic on segment i.
  double antiderivative(std::size_t i, double t) const {
    const double h = x_[i + 1] - x_[i];
    const double slope = (y_[i + 1] - y_[i]) / h - h * (2.0 * m_[i] + m_[i + 1]) / 6.0;
    const double c2 = m_[i] / 2.0;
    const double c3 = (m_[i + 1] - m_[i]) / (6.0 * h);
    return t * (y_[i] + t * (slope / 2.0 + t * (c2 / 3.0 + t * c3 / 4.0)));
  }

  std::vector<double> x_, y_, m_;
};

NaturalSpline log_rate_curve(std::span<const RdPoint> curve, const char* which) {
  if (curve.size() < 4) {
    throw MetricError(std::string("bd_rate: ") + which + " curve needs at least 4 points, got " +
                      std::to_string(curve.size()));
  }
  std::vector<RdPoint> pts(curve.begin(), curve.end());
  std::sort(pts.begin(), pts.end(), [](const RdPoint& a, const RdPoint& b) { return a.psnr < b.psnr; });
  std::vector<double> x, y;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!(pts[i].bpp > 0) || !std::isfinite(pts[i].bpp) || !std::isfinite(pts[i].psnr)) {
      throw MetricError(std::string("bd_rate: ") + which + " curve has a non-positive or non-finite point");
    }
    if (i > 0 && (pts[i].psnr <= pts[i - 1].psnr || pts[i].bpp <= pts[i - 1].bpp)) {
      throw MetricError(std::string("bd_rate: ") + which + " curve is not monotone");
    }
    x.push_back(pts[i].psnr);
    y.push_back(std::log10(pts[i].bpp));
  }
  return NaturalSpline(std::move(x), std::move(y));
}

std::pair<double, double> psnr_range(std::span<const RdPoint> curve) {
  const auto [lo, hi] = std::minmax_element(curve.begin(), curve.end(),
                                            [](const RdPoint& a, const RdPoint& b) { return a.psnr < b.psnr; });
  return {lo->psnr, hi->psnr};
}

}  // namespace

double psnr_from_mse(double mse) {
  if (!(mse >= 0) || !std::isfinite(mse)) throw MetricError("psnr: mse must be finite and non-negative");
  if (mse == 0) return kPsnrIdentical;
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double psnr(const Image& reference, const Image& distorted) {
  if (reference.height != distorted.height || reference.width != distorted.width ||
      reference.channels != distorted.channels || reference.pixels.size() != distorted.pixels.size()) {
    throw MetricError("psnr: image sizes differ");
  }
  if (reference.pixels.empty()) throw MetricError("psnr: empty image");
  double sum = 0;
  for (std::size_t i = 0; i < reference.pixels.size(); ++i) {
    const double d = double(reference.pixels[i]) - double(distorted.pixels[i]);
    sum += d * d;
  }
  return psnr_from_mse(sum / double(reference.pixels.size()));
}

double psnr(const Tensorf& reference, const Tensorf& distorted) {
  require_same_shape(reference.shape(), distorted.shape(), "psnr");
  if (reference.empty()) throw MetricError("psnr: empty map");
  const Eigen::ArrayXd diff =
      (reference.values().cast<double>() - distorted.values().cast<double>()).array() * 255.0;
  return psnr_from_mse(diff.square().mean());
}

double bd_rate(std::span<const RdPoint> anchor, std::span<const RdPoint> test) {
  const NaturalSpline fa = log_rate_curve(anchor, "anchor");
  const NaturalSpline fb = log_rate_curve(test, "test");
  const auto [a_lo, a_hi] = psnr_range(anchor);
  const auto [b_lo, b_hi] = psnr_range(test);
  const double lo = std::max(a_lo, b_lo), hi = std::min(a_hi, b_hi);
  if (!(hi > lo)) throw MetricError("bd_rate: PSNR ranges do not overlap");
  const double mean_diff = (fb.integrate(lo, hi) - fa.integrate(lo, hi)) / (hi - lo);
  return (std::pow(10.0, mean_diff) - 1.0) * 100.0;
}

Tensor<double> normalize_latent(const Tensorf& y, const Tensorf& mean, const Tensorf& scale) {
  require_same_shape(y.shape(), mean.shape(), "normalize_latent");
  require_same_shape(y.shape(), scale.shape(), "normalize_latent");
  if ((scale.values().array() <= 0.0f).any()) throw MetricError("normalize_latent: scales must be positive");
  Vector<double> v = (y.values().cast<double>() - mean.values().cast<double>()).cwiseQuotient(
      scale.values().cast<double>());
  return Tensor<double>(y.shape(), std::move(v));
}

CorrelationAccumulator::CorrelationAccumulator(Index max_offset) : max_offset_(max_offset) {
  if (max_offset < 0) throw MetricError("latent_correlation: max_offset must be >= 0");
  sums_ = Eigen::MatrixXd::Zero(2 * max_offset + 1, 2 * max_offset + 1);
  counts_ = Eigen::Matrix<std::int64_t, -1, -1>::Zero(2 * max_offset + 1, 2 * max_offset + 1);
}

void CorrelationAccumulator::add(const Tensor<double>& z) {
  if (z.rank() != 3) throw MetricError("latent_correlation: expected H x W x C, got " + shape_string(z.shape()));
  const Index h = z.height(), w = z.width(), k = max_offset_;
  const auto tokens = z.tokens();
  Eigen::VectorXd norms(tokens.rows());
  for (Index i = 0; i < tokens.rows(); ++i) norms[i] = tokens.row(i).dot(tokens.row(i));

  // Pairs at offset o and -o are the same set, so only half the offsets are
  // computed and the rest mirrored.
  for (Index di = 0; di <= k; ++di) {
    for (Index dj = (di == 0 ? 0 : -k); dj <= k; ++dj) {
      double sum = 0;
      std::int64_t count = 0;
      for (Index r = 0; r + di < h; ++r) {
        for (Index c = std::max<Index>(0, -dj); c < w && c + dj < w; ++c) {
          const Index a = r * w + c, b = (r + di) * w + c + dj;
          const double na = norms[a], nb = norms[b];
          if (na == 0 || nb == 0) continue;
          const double corr = tokens.row(a).dot(tokens.row(b)) / std::sqrt(na * nb);
          sum += std::clamp(corr, -1.0, 1.0);
          ++count;
        }
      }
      sums_(k + di, k + dj) += sum;
      counts_(k + di, k + dj) += count;
      if (di != 0 || dj != 0) {
        sums_(k - di, k - dj) += sum;
        counts_(k - di, k - dj) += count;
      }
    }
  }
}

CorrelationMap CorrelationAccumulator::result() const {
  CorrelationMap out{max_offset_, Eigen::MatrixXd::Zero(sums_.rows(), sums_.cols()), counts_};
  for (Index i = 0; i < sums_.rows(); ++i) {
    for (Index j = 0; j < sums_.cols(); ++j) {
      if (counts_(i, j) > 0) out.values(i, j) = std::clamp(sums_(i, j) / double(counts_(i, j)), -1.0, 1.0);
    }
  }
  return out;
}

CorrelationMap latent_correlation(const Tensorf& y, const Tensorf& mean, const Tensorf& scale, Index max_offset) {
  CorrelationAccumulator acc(max_offset);
  acc.add(normalize_latent(y, mean, scale));
  return acc.result();
}

double kl_to_standard_normal(std::span<const double> samples, int bins) {
  if (samples.empty()) throw MetricError("kl_to_standard_normal: no samples");
  if (bins < 1) throw MetricError("kl_to_standard_normal: bins must be >= 1");
  const double width = 2.0 * kKlRange / bins;
  Eigen::ArrayXd counts = Eigen::ArrayXd::Zero(bins);
  for (const double s : samples) {
    if (!(s >= -kKlRange && s <= kKlRange)) continue;
    const auto bin = std::min<Index>(static_cast<Index>(std::floor((s + kKlRange) / width)), bins - 1);
    counts[bin] += 1.0;
  }
  const double total = counts.sum();
  if (total == 0) throw MetricError("kl_to_standard_normal: no samples inside [-6, 6]");

  Eigen::ArrayXd q(bins);
  const auto cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
  for (int i = 0; i < bins; ++i) q[i] = cdf(-kKlRange + (i + 1) * width) - cdf(-kKlRange + i * width);
  q /= q.sum();

  const Eigen::ArrayXd p = (counts / total + kKlEpsilon) / (1.0 + bins * kKlEpsilon);
  q = (q + kKlEpsilon) / (1.0 + bins * kKlEpsilon);
  return (p * (p / q).log()).sum();
}

DeviationMap quantize_deviation(const Tensorf& y, const Tensorf& y_hat) {
  require_same_shape(y.shape(), y_hat.shape(), "quantize_deviation");
  if (y.rank() != 3 || y.empty()) throw MetricError("quantize_deviation: expected a non-empty H x W x C latent");
  const Eigen::VectorXd per_token =
      (y.tokens().cast<double>() - y_hat.tokens().cast<double>()).cwiseAbs().rowwise().mean();
  DeviationMap out;
  out.map = Eigen::Map<const RowMatrix<double>>(per_token.data(), y.height(), y.width());
  out.mean = per_token.mean();
  return out;
}

std::vector<std::uint8_t> map_to_pgm(const Eigen::MatrixXd& map) {
  if (map.size() == 0) throw MetricError("map_to_pgm: empty map");
  const double lo = map.minCoeff(), hi = map.maxCoeff();
  const std::string header = "P5\n" + std::to_string(map.cols()) + " " + std::to_string(map.rows()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (Index r = 0; r < map.rows(); ++r) {
    for (Index c = 0; c < map.cols(); ++c) {
      const double v = hi > lo ? (map(r, c) - lo) / (hi - lo) : 0.0;
      out.push_back(static_cast<std::uint8_t>(std::lround(255.0 * v)));
    }
  }
  return out;
}

}  // namespace ssmc

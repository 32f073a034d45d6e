#include "ssmcodec/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ssmc;

namespace {

std::vector<RdPoint> linear_curve(double slope, double offset, double psnr_lo, double psnr_hi, int points) {
  std::vector<RdPoint> c;
  for (int i = 0; i < points; ++i) {
    const double p = psnr_lo + (psnr_hi - psnr_lo) * i / (points - 1);
    c.push_back({std::pow(10.0, slope * p + offset), p});
  }
  return c;
}

Tensorf gaussian_latent(Index h, Index w, Index c, std::mt19937_64& rng) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  Tensorf t({h, w, c});
  for (Index i = 0; i < t.size(); ++i) t[i] = n(rng);
  return t;
}

}  // namespace

TEST(Psnr, ClosedFormForty) { EXPECT_NEAR(psnr_from_mse(6.5025), 40.0, 1e-9); }

TEST(Psnr, IdenticalInputsGiveSentinel) {
  const Image img{2, 2, 3, std::vector<std::uint8_t>(12, 77)};
  EXPECT_EQ(psnr(img, img), kPsnrIdentical);
  EXPECT_TRUE(std::isinf(psnr_from_mse(0.0)));
}

TEST(Psnr, MatchesExtendedPrecisionOracle) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    Image a{7, 9, 3, std::vector<std::uint8_t>(189)}, b = a;
    long double sum = 0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
      a.pixels[i] = static_cast<std::uint8_t>(rng());
      b.pixels[i] = static_cast<std::uint8_t>(rng());
      const long double d = (long double)a.pixels[i] - (long double)b.pixels[i];
      sum += d * d;
    }
    const long double mse = sum / a.pixels.size();
    const long double want = 10.0L * std::log10(65025.0L / mse);
    EXPECT_NEAR(psnr(a, b), static_cast<double>(want), 1e-10);
  }
}

TEST(Psnr, StrictlyDecreasingInMse) {
  double prev = psnr_from_mse(1e-6);
  for (double mse = 2e-6; mse < 1e5; mse *= 1.7) {
    const double p = psnr_from_mse(mse);
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Psnr, TensorsMeasuredOnEightBitScale) {
  const Tensorf a = Tensorf::constant({4, 4, 3}, 0.5f);
  Tensorf b = a;
  b.values().array() += 1.0f / 255.0f;  // one code value everywhere
  EXPECT_NEAR(psnr(a, b), 10.0 * std::log10(65025.0), 1e-4);
  EXPECT_THROW(psnr(a, Tensorf({4, 4, 1})), MetricError);
  EXPECT_THROW(psnr_from_mse(-1.0), MetricError);
}

TEST(BdRate, IdenticalCurvesGiveExactlyZero) {
  const std::vector<RdPoint> a{{0.1, 28.0}, {0.25, 31.0}, {0.5, 34.5}, {0.9, 37.0}, {1.4, 39.2}};
  EXPECT_EQ(bd_rate(a, a), 0.0);
}

TEST(BdRate, DoubledRateIsPlusHundredPercent) {
  const std::vector<RdPoint> a{{0.1, 28.0}, {0.25, 31.0}, {0.5, 34.5}, {0.9, 37.0}};
  std::vector<RdPoint> b = a;
  for (auto& p : b) p.bpp *= 2.0;
  EXPECT_NEAR(bd_rate(a, b), 100.0, 0.1);
  EXPECT_NEAR(bd_rate(b, a), -50.0, 0.1);
}

TEST(BdRate, ShiftedLinearCurveHasClosedForm) {
  // log10 R = 0.1 p - 3 for the anchor; the test curve reaches every rate
  // 1 dB higher, so its log rate is lower by 0.1 everywhere they overlap.
  const auto anchor = linear_curve(0.1, -3.0, 28, 40, 5);
  const auto test = linear_curve(0.1, -3.1, 30, 42, 6);
  EXPECT_NEAR(bd_rate(anchor, test), (std::pow(10.0, -0.1) - 1.0) * 100.0, 1e-9);
}

TEST(BdRate, SignIsAntisymmetric) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<RdPoint> a, b;
    double ra = 0.05, rb = 0.05 * (0.5 + u(rng)), pa = 26, pb = 26 + u(rng);
    for (int i = 0; i < 4 + int(rng() % 3); ++i) {
      ra *= 1.3 + u(rng);
      rb *= 1.3 + u(rng);
      pa += 1 + 3 * u(rng);
      pb += 1 + 3 * u(rng);
      a.push_back({ra, pa});
      b.push_back({rb, pb});
    }
    double ab = 0, ba = 0;
    try {
      ab = bd_rate(a, b);
      ba = bd_rate(b, a);
    } catch (const MetricError&) {
      continue;  // disjoint PSNR ranges
    }
    if (ab == 0.0) continue;
    EXPECT_EQ(ab > 0, ba < 0) << ab << " " << ba;
    // The two directions are reciprocal in rate ratio.
    EXPECT_NEAR((1 + ab / 100) * (1 + ba / 100), 1.0, 1e-9);
  }
}

TEST(BdRate, RejectsDegenerateCurves) {
  const std::vector<RdPoint> three{{0.1, 28}, {0.2, 30}, {0.4, 32}};
  const std::vector<RdPoint> four{{0.1, 28}, {0.2, 30}, {0.4, 32}, {0.8, 34}};
  const std::vector<RdPoint> far{{0.1, 40}, {0.2, 42}, {0.4, 44}, {0.8, 46}};
  const std::vector<RdPoint> bumpy{{0.1, 28}, {0.3, 30}, {0.2, 32}, {0.8, 34}};
  const std::vector<RdPoint> zero{{0.0, 28}, {0.2, 30}, {0.4, 32}, {0.8, 34}};
  EXPECT_THROW(bd_rate(three, four), MetricError);
  EXPECT_THROW(bd_rate(four, far), MetricError);
  EXPECT_THROW(bd_rate(four, bumpy), MetricError);
  EXPECT_THROW(bd_rate(zero, four), MetricError);
}

TEST(LatentCorrelation, CenterIsExactlyOne) {
  std::mt19937_64 rng(3);
  const Tensorf y = gaussian_latent(9, 11, 16, rng);
  const Tensorf mu = Tensorf::constant(y.shape(), 0.2f), sigma = Tensorf::constant(y.shape(), 1.5f);
  const CorrelationMap m = latent_correlation(y, mu, sigma, 3);
  EXPECT_EQ(m.at(0, 0), 1.0);
  EXPECT_EQ(m.samples_at(0, 0), 99);
  EXPECT_EQ(m.samples_at(2, -3), (9 - 2) * (11 - 3));
}

TEST(LatentCorrelation, IndependentLatentsAreUncorrelated) {
  std::mt19937_64 rng(4);
  const Tensorf y = gaussian_latent(32, 32, 64, rng);
  const Tensorf mu(y.shape()), sigma = Tensorf::constant(y.shape(), 1.0f);
  const CorrelationMap m = latent_correlation(y, mu, sigma, 4);
  for (Index i = -4; i <= 4; ++i) {
    for (Index j = -4; j <= 4; ++j) {
      if (i == 0 && j == 0) continue;
      EXPECT_LT(std::abs(m.at(i, j)), 3.0 / std::sqrt(double(m.samples_at(i, j)))) << i << "," << j;
    }
  }
}

TEST(LatentCorrelation, SymmetricAndBounded) {
  std::mt19937_64 rng(5);
  Tensorf y = gaussian_latent(12, 10, 8, rng);
  for (Index i = 0; i < y.size(); ++i) y[i] += 0.8f * y[i % 8];  // shared component
  const CorrelationMap m = latent_correlation(y, Tensorf(y.shape()), Tensorf::constant(y.shape(), 1.0f), 5);
  for (Index i = -5; i <= 5; ++i) {
    for (Index j = -5; j <= 5; ++j) {
      EXPECT_EQ(m.at(i, j), m.at(-i, -j));
      EXPECT_LE(std::abs(m.at(i, j)), 1.0);
    }
  }
}

TEST(LatentCorrelation, MatchesDirectComputation) {
  std::mt19937_64 rng(6);
  const Tensorf y = gaussian_latent(6, 7, 5, rng);
  const Tensorf mu = gaussian_latent(6, 7, 5, rng);
  Tensorf sigma = gaussian_latent(6, 7, 5, rng);
  sigma.values() = sigma.values().cwiseAbs().array() + 0.5f;
  const CorrelationMap m = latent_correlation(y, mu, sigma, 2);
  const auto z = [&](Index h, Index w, Index c) {
    return (double(y(h, w, c)) - double(mu(h, w, c))) / double(sigma(h, w, c));
  };
  const Index di = 1, dj = -2;
  double sum = 0;
  int count = 0;
  for (Index h = 0; h < 6; ++h) {
    for (Index w = 0; w < 7; ++w) {
      const Index h2 = h + di, w2 = w + dj;
      if (h2 < 0 || h2 >= 6 || w2 < 0 || w2 >= 7) continue;
      double dot = 0, na = 0, nb = 0;
      for (Index c = 0; c < 5; ++c) {
        dot += z(h, w, c) * z(h2, w2, c);
        na += z(h, w, c) * z(h, w, c);
        nb += z(h2, w2, c) * z(h2, w2, c);
      }
      sum += dot / std::sqrt(na * nb);
      ++count;
    }
  }
  EXPECT_NEAR(m.at(di, dj), sum / count, 1e-12);
}

TEST(LatentCorrelation, RejectsBadInput) {
  const Tensorf y({2, 2, 2});
  EXPECT_THROW(latent_correlation(y, y, Tensorf({2, 2, 2}), 1), MetricError);  // zero scale
  EXPECT_THROW(latent_correlation(y, Tensorf({2, 2, 1}), y, 1), MetricError);
  EXPECT_THROW(CorrelationAccumulator(-1), MetricError);
}

TEST(Kl, StandardNormalSamplesAreClose) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> s(1'000'000);
  for (auto& v : s) v = n(rng);
  EXPECT_LT(kl_to_standard_normal(s), 0.005);
}

TEST(Kl, ShiftedNormalHasHalfNat) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(1.0, 1.0);
  std::vector<double> s(1'000'000);
  for (auto& v : s) v = n(rng);
  EXPECT_NEAR(kl_to_standard_normal(s), 0.5, 0.02);
}

TEST(Kl, RejectsEmptyInput) {
  EXPECT_THROW(kl_to_standard_normal(std::vector<double>{}), MetricError);
  EXPECT_THROW(kl_to_standard_normal(std::vector<double>{100.0}), MetricError);
}

TEST(QuantizeDeviation, ZeroAndConstantOffsets) {
  std::mt19937_64 rng(9);
  const Tensorf y = gaussian_latent(4, 5, 6, rng);
  const DeviationMap same = quantize_deviation(y, y);
  EXPECT_EQ(same.mean, 0.0);
  EXPECT_EQ(same.map.cwiseAbs().maxCoeff(), 0.0);
  Tensorf shifted = y;
  shifted.values().array() += 0.3f;
  const DeviationMap off = quantize_deviation(y, shifted);
  EXPECT_NEAR(off.mean, 0.3, 1e-6);
  EXPECT_NEAR(off.map.minCoeff(), 0.3, 1e-6);
  EXPECT_NEAR(off.map.maxCoeff(), 0.3, 1e-6);
}

TEST(QuantizeDeviation, MatchesDirectSummation) {
  std::mt19937_64 rng(10);
  const Tensorf y = gaussian_latent(3, 4, 7, rng), y_hat = gaussian_latent(3, 4, 7, rng);
  const DeviationMap d = quantize_deviation(y, y_hat);
  ASSERT_EQ(d.map.rows(), 3);
  ASSERT_EQ(d.map.cols(), 4);
  double total = 0;
  for (Index h = 0; h < 3; ++h) {
    for (Index w = 0; w < 4; ++w) {
      double s = 0;
      for (Index c = 0; c < 7; ++c) s += std::abs(double(y(h, w, c)) - double(y_hat(h, w, c)));
      EXPECT_NEAR(d.map(h, w), s / 7, 1e-12);
      total += s / 7;
    }
  }
  EXPECT_NEAR(d.mean, total / 12, 1e-12);
}

TEST(QuantizeDeviation, PgmExportIsMinMaxScaled) {
  Eigen::MatrixXd m(2, 3);
  m << 1.0, 2.0, 3.0, 1.5, 2.5, 1.0;
  const auto pgm = map_to_pgm(m);
  const std::string header = "P5\n3 2\n255\n";
  ASSERT_EQ(pgm.size(), header.size() + 6);
  EXPECT_EQ(std::string(pgm.begin(), pgm.begin() + header.size()), header);
  const std::vector<std::uint8_t> px(pgm.begin() + header.size(), pgm.end());
  EXPECT_EQ(px, (std::vector<std::uint8_t>{0, 128, 255, 64, 191, 0}));
}

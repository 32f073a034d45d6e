#include "fixtures.hpp"
#include "ssmcodec/scan2d.hpp"

#include <gtest/gtest.h>

using namespace ssmc;

namespace {

// 2x2 grid whose channel value identifies the token: a=0, b=1, c=2, d=3.
Tensorf abcd() {
  Tensorf f({2, 2, 1});
  for (Index i = 0; i < 4; ++i) f[i] = static_cast<float>(i);
  return f;
}

std::vector<int> as_letters(const RowMatrix<float>& s) {
  std::vector<int> out;
  for (Index i = 0; i < s.rows(); ++i) out.push_back(static_cast<int>(s(i, 0)));
  return out;
}

Tensorf rotate180(const Tensorf& f) {
  Tensorf out(f.shape());
  const Index h = f.height(), w = f.width();
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      for (Index c = 0; c < f.channels(); ++c) out(y, x, c) = f(h - 1 - y, w - 1 - x, c);
  return out;
}

}  // namespace

TEST(Unfold, TwoByTwoEnumeration) {
  const auto f = abcd();
  EXPECT_EQ(as_letters(unfold(f, ScanDirection::kRowMajor)), (std::vector<int>{0, 1, 2, 3}));
  EXPECT_EQ(as_letters(unfold(f, ScanDirection::kRowMajorReversed)), (std::vector<int>{3, 2, 1, 0}));
  EXPECT_EQ(as_letters(unfold(f, ScanDirection::kColMajor)), (std::vector<int>{0, 2, 1, 3}));
  EXPECT_EQ(as_letters(unfold(f, ScanDirection::kColMajorReversed)), (std::vector<int>{3, 1, 2, 0}));
}

TEST(Unfold, DegenerateGridsRowAndColumnCoincide) {
  std::mt19937_64 rng(31);
  for (const auto& shape : {Shape{1, 6, 2}, Shape{5, 1, 2}, Shape{1, 1, 3}}) {
    const auto f = ref::random_tensor<float>(shape, rng);
    EXPECT_EQ(unfold(f, ScanDirection::kRowMajor), unfold(f, ScanDirection::kColMajor));
    EXPECT_EQ(unfold(f, ScanDirection::kRowMajorReversed), unfold(f, ScanDirection::kColMajorReversed));
  }
}

TEST(Fold, InvertsUnfoldOnRandomMaps) {
  std::mt19937_64 rng(32);
  const auto f = ref::random_tensor<float>({5, 7, 3}, rng);
  for (const auto d : kScanDirections) EXPECT_EQ(fold<float>(unfold(f, d), {d, 5, 7}), f) << to_string(d);
  RowMatrix<float> s = unfold(abcd(), ScanDirection::kRowMajor);
  EXPECT_EQ(fold<float>(s, {ScanDirection::kRowMajor, 2, 2}), abcd());
}

TEST(Fold, PermutationTableMatchesIndexArithmetic) {
  for (const auto& [h, w] : std::vector<std::pair<Index, Index>>{{3, 5}, {4, 4}, {6, 2}, {1, 7}}) {
    for (int k = 0; k < 4; ++k) {
      const ScanPattern pattern{kScanDirections[static_cast<std::size_t>(k)], h, w};
      RowMatrix<float> positions(h * w, 1);
      for (Index i = 0; i < h * w; ++i) positions(i, 0) = static_cast<float>(i);
      const auto table = fold<float>(positions, pattern);
      const auto literal = fixtures::literal_order(k, h, w);
      for (Index i = 0; i < h * w; ++i) {
        EXPECT_EQ(static_cast<Index>(table[literal[static_cast<std::size_t>(i)]]), i);
      }
    }
  }
}

TEST(Fold, RejectsLengthMismatch) {
  EXPECT_THROW(fold<float>(RowMatrix<float>(5, 2), {ScanDirection::kRowMajor, 2, 2}), ShapeError);
}

TEST(Property, UnfoldFoldIdentityUpTo64) {
  std::mt19937_64 rng(33);
  std::uniform_int_distribution<Index> ext(1, 64);
  for (int trial = 0; trial < 60; ++trial) {
    const Index h = ext(rng), w = ext(rng);
    const auto f = ref::random_tensor<float>({h, w, 2}, rng);
    for (const auto d : kScanDirections) ASSERT_EQ(fold<float>(unfold(f, d), {d, h, w}), f);
  }
}

TEST(Scan2d, SingleTokenTiedIsFourTimesS6) {
  std::mt19937_64 rng(34);
  const auto s6 = fixtures::random_s6<float>(4, 3, rng);
  const auto f = ref::random_tensor<float>({1, 1, 4}, rng);
  const auto out = scan2d(f, Scan2dWeights<float>::tied(s6));
  const RowMatrix<float> single = s6_forward<float>(f.tokens(), s6);
  for (Index c = 0; c < 4; ++c) EXPECT_EQ(out[c], 4.0f * single(0, c));
}

TEST(Scan2d, ZeroReadoutAndSkipGivesZeros) {
  std::mt19937_64 rng(35);
  auto w = fixtures::random_scan2d<float>(3, 4, rng);
  for (auto& d : w.directions) {
    d.x_proj.rightCols(4).setZero();
    d.d_skip.setZero();
  }
  const auto out = scan2d(ref::random_tensor<float>({3, 5, 3}, rng), w);
  EXPECT_TRUE((out.values().array() == 0.0f).all());
}

TEST(Scan2d, MatchesLiteralComposition) {
  std::mt19937_64 rng(36);
  const auto w = fixtures::random_scan2d<float>(2, 4, rng);
  const auto f = ref::random_tensor<float>({4, 4, 2}, rng);
  const auto expected = fixtures::scan2d_reference(f, w);
  for (const auto algo : {ScanAlgorithm::kSequential, ScanAlgorithm::kParallel}) {
    const auto out = scan2d(f, w, algo).cast<double>();
    EXPECT_LT(fixtures::rel_error(out.values(), expected.values()), 1e-5);
  }
  const auto wd = w.cast<double>();
  const auto exact = scan2d(f.cast<double>(), wd);
  EXPECT_LT(fixtures::rel_error(exact.values(), expected.values()), 1e-12);
}

TEST(Scan2d, RotationSymmetryWithSwappedDirections) {
  std::mt19937_64 rng(37);
  const auto f = ref::random_tensor<float>({5, 3, 2}, rng);
  const auto tied = Scan2dWeights<float>::tied(fixtures::random_s6<float>(2, 4, rng));
  EXPECT_EQ(scan2d(rotate180(f), tied), rotate180(scan2d(f, tied)));

  const auto w = fixtures::random_scan2d<float>(2, 4, rng);
  const Scan2dWeights<float> swapped{{w.directions[1], w.directions[0], w.directions[3], w.directions[2]}};
  EXPECT_EQ(scan2d(rotate180(f), swapped), rotate180(scan2d(f, w)));
}

TEST(Scan2d, ShapePreserved) {
  std::mt19937_64 rng(38);
  const auto w = fixtures::random_scan2d<float>(3, 2, rng);
  for (const auto& shape : {Shape{1, 9, 3}, Shape{6, 2, 3}, Shape{7, 7, 3}}) {
    EXPECT_EQ(scan2d(ref::random_tensor<float>(shape, rng), w).shape(), shape);
  }
}

#pragma once

#include "ssmcodec/ssm.hpp"
#include "ssmcodec/tensor.hpp"

#include <array>
#include <string>
#include <vector>

namespace ssmc {

/// The four traversals of an H x W grid used by the 2-D selective scan.
enum class ScanDirection {
  kRowMajor,          // left to right, top to bottom
  kRowMajorReversed,  // exact reversal of kRowMajor
  kColMajor,          // top to bottom, left to right
  kColMajorReversed,  // exact reversal of kColMajor
};

inline constexpr std::array<ScanDirection, 4> kScanDirections{
    ScanDirection::kRowMajor, ScanDirection::kRowMajorReversed, ScanDirection::kColMajor,
    ScanDirection::kColMajorReversed};

inline const char* to_string(ScanDirection d) {
  switch (d) {
    case ScanDirection::kRowMajor: return "row-major";
    case ScanDirection::kRowMajorReversed: return "row-major-reversed";
    case ScanDirection::kColMajor: return "col-major";
    case ScanDirection::kColMajorReversed: return "col-major-reversed";
  }
  return "?";
}

struct ScanPattern {
  ScanDirection direction = ScanDirection::kRowMajor;
  Index height = 0;
  Index width = 0;

  Index size() const { return height * width; }

  /// Flat grid index (h * W + w) visited at sequence position `step`.
  Index position(Index step) const {
    const Index n = size();
    switch (direction) {
      case ScanDirection::kRowMajor: return step;
      case ScanDirection::kRowMajorReversed: return n - 1 - step;
      case ScanDirection::kColMajor: return (step % height) * width + step / height;
      case ScanDirection::kColMajorReversed: {
        const Index j = n - 1 - step;
        return (j % height) * width + j / height;
      }
    }
    return step;
  }

  std::vector<Index> order() const {
    std::vector<Index> out(static_cast<std::size_t>(size()));
    for (Index i = 0; i < size(); ++i) out[static_cast<std::size_t>(i)] = position(i);
    return out;
  }
};

/// Flattens an H x W x C map into an N x C token sequence along `direction`.
template <typename Scalar>
RowMatrix<Scalar> unfold(const Tensor<Scalar>& f, ScanDirection direction) {
  if (f.rank() != 3) throw ShapeError("unfold: expected H x W x C, got " + shape_string(f.shape()));
  const ScanPattern pattern{direction, f.height(), f.width()};
  const auto tokens = f.tokens();
  RowMatrix<Scalar> s(pattern.size(), f.channels());
  for (Index i = 0; i < pattern.size(); ++i) s.row(i) = tokens.row(pattern.position(i));
  return s;
}

/// Inverse of unfold for the same pattern.
template <typename Scalar>
Tensor<Scalar> fold(const Eigen::Ref<const RowMatrix<Scalar>>& s, const ScanPattern& pattern) {
  if (s.rows() != pattern.size()) {
    throw ShapeError("fold: sequence length " + std::to_string(s.rows()) + " != " +
                     std::to_string(pattern.height) + "x" + std::to_string(pattern.width));
  }
  Tensor<Scalar> f({pattern.height, pattern.width, s.cols()});
  auto tokens = f.tokens();
  for (Index i = 0; i < pattern.size(); ++i) tokens.row(pattern.position(i)) = s.row(i);
  return f;
}

/// One S6 parameter set per traversal, in kScanDirections order.
template <typename Scalar>
struct Scan2dWeights {
  std::array<S6Weights<Scalar>, 4> directions;

  static Scan2dWeights tied(const S6Weights<Scalar>& w) { return {{w, w, w, w}}; }

  template <typename Other>
  Scan2dWeights<Other> cast() const {
    return {{directions[0].template cast<Other>(), directions[1].template cast<Other>(),
             directions[2].template cast<Other>(), directions[3].template cast<Other>()}};
  }
};

/// f' = f'_1 + f'_2 + f'_3 + f'_4 where f'_k = fold(s6_k(unfold(f, k)), k).
/// The merge is evaluated as (f'_1 + f'_2) + (f'_3 + f'_4).
template <typename Scalar>
Tensor<Scalar> scan2d(const Tensor<Scalar>& f, const Scan2dWeights<Scalar>& w,
                      ScanAlgorithm algorithm = ScanAlgorithm::kSequential) {
  if (f.rank() != 3) throw ShapeError("scan2d: expected H x W x C, got " + shape_string(f.shape()));
  std::array<Tensor<Scalar>, 2> pairs{Tensor<Scalar>(f.shape()), Tensor<Scalar>(f.shape())};
  for (std::size_t k = 0; k < 4; ++k) {
    const ScanPattern pattern{kScanDirections[k], f.height(), f.width()};
    const RowMatrix<Scalar> y = s6_forward<Scalar>(unfold(f, pattern.direction), w.directions[k], algorithm);
    auto dst = pairs[k / 2].tokens();
    for (Index i = 0; i < pattern.size(); ++i) dst.row(pattern.position(i)) += y.row(i);
  }
  pairs[0].values() += pairs[1].values();
  return std::move(pairs[0]);
}

}  // namespace ssmc

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ssmc {

using Index = Eigen::Index;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowArray = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Shape = std::vector<Index>;

/// Raised for any extent/rank disagreement between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

/// Dense N-d array with contiguous storage. The last axis is the fastest
/// varying one, so an H x W x C feature map is a (H*W) x C row-major token
/// matrix and an L x D sequence is an L x D row-major matrix.
template <typename Scalar>
class Tensor {
 public:
  using value_type = Scalar;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    check_extents();
    data_ = Vector<Scalar>::Zero(shape_size(shape_));
  }

  Tensor(Shape shape, Vector<Scalar> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents();
    if (data_.size() != shape_size(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor constant(Shape shape, Scalar value) {
    Tensor t(std::move(shape));
    t.data_.setConstant(value);
    return t;
  }

  /// Wraps a token matrix as an H x W x C map.
  template <typename Derived>
  static Tensor from_tokens(Index height, Index width, const Eigen::MatrixBase<Derived>& tokens) {
    if (tokens.rows() != height * width) {
      throw ShapeError("token count " + std::to_string(tokens.rows()) + " != " +
                       std::to_string(height) + "x" + std::to_string(width));
    }
    Tensor t({height, width, tokens.cols()});
    t.tokens() = tokens;
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  Vector<Scalar>& values() { return data_; }
  const Vector<Scalar>& values() const { return data_; }

  Index height() const { return dim(0); }
  Index width() const { return dim(1); }
  Index channels() const { return shape_.empty() ? 0 : shape_.back(); }

  /// Row-major view with one row per token (all axes but the last).
  Eigen::Map<RowMatrix<Scalar>> tokens() {
    return {data_.data(), token_count(), channels()};
  }
  Eigen::Map<const RowMatrix<Scalar>> tokens() const {
    return {data_.data(), token_count(), channels()};
  }

  Scalar& operator()(Index h, Index w, Index c) { return data_[(h * shape_[1] + w) * shape_[2] + c]; }
  Scalar operator()(Index h, Index w, Index c) const { return data_[(h * shape_[1] + w) * shape_[2] + c]; }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Index token_count() const {
    if (shape_.empty()) return 0;
    const Index c = shape_.back();
    return c == 0 ? 0 : data_.size() / c;
  }

  void check_extents() const {
    for (Index e : shape_) {
      if (e < 0) throw ShapeError("negative extent in shape " + shape_string(shape_));
    }
  }

  Shape shape_;
  Vector<Scalar> data_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

/// Concatenates H x W x C_k maps along the channel axis.
template <typename Scalar>
Tensor<Scalar> concat_channels(const std::vector<const Tensor<Scalar>*>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Index h = parts.front()->height();
  const Index w = parts.front()->width();
  Index total = 0;
  for (const auto* p : parts) {
    if (p->rank() != 3 || p->height() != h || p->width() != w) {
      throw ShapeError("concat_channels: spatial mismatch " + shape_string(p->shape()));
    }
    total += p->channels();
  }
  Tensor<Scalar> out({h, w, total});
  auto dst = out.tokens();
  Index offset = 0;
  for (const auto* p : parts) {
    dst.middleCols(offset, p->channels()) = p->tokens();
    offset += p->channels();
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> slice_channels(const Tensor<Scalar>& x, Index first, Index count) {
  if (first < 0 || count < 0 || first + count > x.channels()) {
    throw ShapeError("slice_channels: range [" + std::to_string(first) + ", " +
                     std::to_string(first + count) + ") outside " + std::to_string(x.channels()));
  }
  Tensor<Scalar> out({x.height(), x.width(), count});
  out.tokens() = x.tokens().middleCols(first, count);
  return out;
}

}  // namespace ssmc

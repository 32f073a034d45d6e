#pragma once

#include "ssmcodec/tensor.hpp"

#include <cmath>
#include <concepts>
#include <string>

namespace ssmc {

enum class ConvDirection { kDown, kUp };

/// Geometry of a (possibly strided, possibly transposed) 2-D convolution.
/// Weights are stored as k x k x C_in x C_out for both directions, where
/// C_in is always the channel count of the operand being convolved.
struct ConvSpec {
  Index kernel = 3;
  Index stride = 1;
  Index padding = 0;
  Index output_padding = 0;  // transposed direction only
  Index in_channels = 0;
  Index out_channels = 0;
  ConvDirection direction = ConvDirection::kDown;

  static ConvSpec down(Index kernel, Index stride, Index padding, Index in, Index out) {
    return {kernel, stride, padding, 0, in, out, ConvDirection::kDown};
  }
  static ConvSpec up(Index kernel, Index stride, Index padding, Index output_padding, Index in,
                     Index out) {
    return {kernel, stride, padding, output_padding, in, out, ConvDirection::kUp};
  }

  void validate() const {
    if (kernel < 1) throw ShapeError("conv: kernel extent must be >= 1, got " + std::to_string(kernel));
    if (stride < 1) throw ShapeError("conv: stride must be >= 1, got " + std::to_string(stride));
    if (padding < 0 || output_padding < 0) throw ShapeError("conv: negative padding");
    if (in_channels < 1 || out_channels < 1) throw ShapeError("conv: channel counts must be >= 1");
  }

  Index output_extent(Index in) const {
    if (direction == ConvDirection::kDown) {
      if (in + 2 * padding < kernel) {
        throw ShapeError("conv2d: padded extent " + std::to_string(in + 2 * padding) +
                         " smaller than kernel " + std::to_string(kernel));
      }
      return (in + 2 * padding - kernel) / stride + 1;
    }
    const Index out = (in - 1) * stride - 2 * padding + kernel + output_padding;
    if (in < 1 || out < 1) throw ShapeError("conv_transpose2d: empty output extent");
    return out;
  }
};

namespace detail {

// Upper bound on scratch elements for one im2col / col2im block.
inline constexpr Index kScratchElements = Index{1} << 22;

template <typename Scalar>
void check_conv(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>& b,
                const ConvSpec& spec, const char* op) {
  spec.validate();
  const std::string name(op);
  if (x.rank() != 3) throw ShapeError(name + ": input must be H x W x C, got " + shape_string(x.shape()));
  if (x.channels() != spec.in_channels) {
    throw ShapeError(name + ": input channels " + std::to_string(x.channels()) +
                     " != spec in_channels " + std::to_string(spec.in_channels));
  }
  const Shape expected{spec.kernel, spec.kernel, spec.in_channels, spec.out_channels};
  if (w.shape() != expected) {
    throw ShapeError(name + ": weight shape " + shape_string(w.shape()) + " != expected " +
                     shape_string(expected));
  }
  if (b.size() != spec.out_channels) {
    throw ShapeError(name + ": bias length " + std::to_string(b.size()) + " != out_channels " +
                     std::to_string(spec.out_channels));
  }
}

}  // namespace detail

/// Zero-padded strided convolution, H x W x C_in -> H' x W' x C_out.
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& w, const Tensor<Scalar>& b,
                      const ConvSpec& spec) {
  if (spec.direction != ConvDirection::kDown) throw ShapeError("conv2d: spec direction is up");
  detail::check_conv(x, w, b, spec, "conv2d");
  const Index k = spec.kernel, s = spec.stride, p = spec.padding;
  const Index hi = x.height(), wi = x.width(), ci = x.channels(), co = spec.out_channels;
  const Index ho = spec.output_extent(hi), wo = spec.output_extent(wi);
  Tensor<Scalar> out({ho, wo, co});
  if (ho == 0 || wo == 0) return out;

  const Index patch = k * k * ci;
  Eigen::Map<const RowMatrix<Scalar>> kernel(w.data(), patch, co);
  const auto bias = b.values().transpose();
  const auto in = x.tokens();
  auto dst = out.tokens();

  const Index rows_per_block = std::max<Index>(1, detail::kScratchElements / (wo * patch));
  RowMatrix<Scalar> patches;
  for (Index oy0 = 0; oy0 < ho; oy0 += rows_per_block) {
    const Index oy1 = std::min(ho, oy0 + rows_per_block);
    patches.setZero((oy1 - oy0) * wo, patch);
    for (Index oy = oy0; oy < oy1; ++oy) {
      for (Index ox = 0; ox < wo; ++ox) {
        const Index r = (oy - oy0) * wo + ox;
        for (Index ky = 0; ky < k; ++ky) {
          const Index iy = oy * s - p + ky;
          if (iy < 0 || iy >= hi) continue;
          for (Index kx = 0; kx < k; ++kx) {
            const Index ix = ox * s - p + kx;
            if (ix < 0 || ix >= wi) continue;
            patches.row(r).segment((ky * k + kx) * ci, ci) = in.row(iy * wi + ix);
          }
        }
      }
    }
    auto block = dst.middleRows(oy0 * wo, (oy1 - oy0) * wo);
    block.noalias() = patches * kernel;
    block.rowwise() += bias;
  }
  return out;
}

/// Strided transposed convolution: out[iy*s - p + ky][ix*s - p + kx] += x[iy][ix] * w[ky][kx].
/// For a fixed weight tensor this is the adjoint of conv2d with the last two
/// weight axes swapped.
template <typename Scalar>
Tensor<Scalar> conv_transpose2d(const Tensor<Scalar>& x, const Tensor<Scalar>& w,
                                const Tensor<Scalar>& b, const ConvSpec& spec) {
  if (spec.direction != ConvDirection::kUp) throw ShapeError("conv_transpose2d: spec direction is down");
  detail::check_conv(x, w, b, spec, "conv_transpose2d");
  const Index k = spec.kernel, s = spec.stride, p = spec.padding;
  const Index hi = x.height(), wi = x.width(), ci = x.channels(), co = spec.out_channels;
  const Index ho = spec.output_extent(hi), wo = spec.output_extent(wi);
  Tensor<Scalar> out({ho, wo, co});
  auto dst = out.tokens();
  dst.rowwise() = b.values().transpose();

  // Rearrange k x k x C_in x C_out into C_in x (k*k*C_out).
  RowMatrix<Scalar> scatter(ci, k * k * co);
  for (Index tap = 0; tap < k * k; ++tap) {
    for (Index c = 0; c < ci; ++c) {
      scatter.row(c).segment(tap * co, co) =
          Eigen::Map<const Vector<Scalar>>(w.data() + (tap * ci + c) * co, co).transpose();
    }
  }

  const auto in = x.tokens();
  const Index rows_per_block = std::max<Index>(1, detail::kScratchElements / (wi * k * k * co));
  RowMatrix<Scalar> cols;
  for (Index iy0 = 0; iy0 < hi; iy0 += rows_per_block) {
    const Index iy1 = std::min(hi, iy0 + rows_per_block);
    cols.noalias() = in.middleRows(iy0 * wi, (iy1 - iy0) * wi) * scatter;
    for (Index iy = iy0; iy < iy1; ++iy) {
      for (Index ix = 0; ix < wi; ++ix) {
        const Index r = (iy - iy0) * wi + ix;
        for (Index ky = 0; ky < k; ++ky) {
          const Index oy = iy * s - p + ky;
          if (oy < 0 || oy >= ho) continue;
          for (Index kx = 0; kx < k; ++kx) {
            const Index ox = ix * s - p + kx;
            if (ox < 0 || ox >= wo) continue;
            dst.row(oy * wo + ox) += cols.row(r).segment((ky * k + kx) * co, co);
          }
        }
      }
    }
  }
  return out;
}

/// Per-channel k x k convolution, stride 1, zero "same" padding (k odd).
template <typename Scalar>
Tensor<Scalar> depthwise_conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& w,
                                const Tensor<Scalar>& b) {
  if (x.rank() != 3) throw ShapeError("depthwise_conv2d: input must be H x W x C");
  const Index h = x.height(), wd = x.width(), c = x.channels();
  if (w.rank() != 3 || w.dim(0) != w.dim(1) || w.dim(0) % 2 == 0) {
    throw ShapeError("depthwise_conv2d: weight must be k x k x C with odd k, got " +
                     shape_string(w.shape()));
  }
  if (w.dim(2) != c) {
    throw ShapeError("depthwise_conv2d: weight channels " + std::to_string(w.dim(2)) +
                     " != input channels " + std::to_string(c));
  }
  if (b.size() != c) {
    throw ShapeError("depthwise_conv2d: bias length " + std::to_string(b.size()) +
                     " != channels " + std::to_string(c));
  }
  const Index k = w.dim(0), r = k / 2;
  Tensor<Scalar> out({h, wd, c});
  auto dst = out.tokens();
  dst.rowwise() = b.values().transpose();
  const auto in = x.tokens();
  Eigen::Map<const RowMatrix<Scalar>> taps(w.data(), k * k, c);
  for (Index ky = 0; ky < k; ++ky) {
    const Index dy = ky - r;
    for (Index kx = 0; kx < k; ++kx) {
      const Index dx = kx - r;
      const Index x0 = std::max<Index>(0, -dx), x1 = std::min(wd, wd - dx);
      if (x1 <= x0) continue;
      const auto tap = taps.row(ky * k + kx).array();
      for (Index oy = std::max<Index>(0, -dy); oy < std::min(h, h - dy); ++oy) {
        const Index iy = oy + dy;
        dst.middleRows(oy * wd + x0, x1 - x0).array() +=
            in.middleRows(iy * wd + x0 + dx, x1 - x0).array().rowwise() * tap;
      }
    }
  }
  return out;
}

/// Token-wise affine map: x[..., C_in] * W (C_in x C_out) + b.
template <typename Scalar>
Tensor<Scalar> linear(const Tensor<Scalar>& x, const Eigen::Ref<const RowMatrix<Scalar>>& weight,
                      const Eigen::Ref<const Vector<Scalar>>& bias) {
  if (x.rank() < 1) throw ShapeError("linear: scalar input");
  if (weight.rows() != x.channels()) {
    throw ShapeError("linear: input width " + std::to_string(x.channels()) + " != weight rows " +
                     std::to_string(weight.rows()));
  }
  if (bias.size() != weight.cols()) {
    throw ShapeError("linear: bias length " + std::to_string(bias.size()) + " != weight cols " +
                     std::to_string(weight.cols()));
  }
  Shape shape = x.shape();
  shape.back() = weight.cols();
  Tensor<Scalar> out(shape);
  auto dst = out.tokens();
  dst.noalias() = x.tokens() * weight;
  dst.rowwise() += bias.transpose();
  return out;
}

template <typename Scalar>
Tensor<Scalar> linear(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias) {
  if (weight.rank() != 2) throw ShapeError("linear: weight must be C_in x C_out");
  Eigen::Map<const RowMatrix<Scalar>> w(weight.data(), weight.dim(0), weight.dim(1));
  return linear<Scalar>(x, w, bias.values());
}

/// Normalizes every token over the channel axis, then applies gamma/beta.
template <typename Scalar>
Tensor<Scalar> layer_norm(const Tensor<Scalar>& x, const Eigen::Ref<const Vector<Scalar>>& gamma,
                          const Eigen::Ref<const Vector<Scalar>>& beta, Scalar eps = Scalar(1e-5)) {
  const Index c = x.channels();
  if (gamma.size() != c || beta.size() != c) {
    throw ShapeError("layer_norm: gamma/beta length " + std::to_string(gamma.size()) + "/" +
                     std::to_string(beta.size()) + " != channels " + std::to_string(c));
  }
  Tensor<Scalar> out(x.shape());
  if (c == 0) return out;
  const auto in = x.tokens().array();
  auto dst = out.tokens().array();
  const Vector<Scalar> mean = in.rowwise().mean();
  dst = in.colwise() - mean.array();
  const Vector<Scalar> inv_std =
      (Scalar(1) / ((dst.square().rowwise().sum() / Scalar(c)) + eps).sqrt()).matrix();
  dst.colwise() *= inv_std.array();
  dst.rowwise() *= gamma.array().transpose();
  dst.rowwise() += beta.array().transpose();
  return out;
}

template <std::floating_point Scalar>
Scalar silu(Scalar v) {
  return v / (Scalar(1) + std::exp(-v));
}

/// ln(1 + e^v) without overflow for large v.
template <std::floating_point Scalar>
Scalar softplus(Scalar v) {
  return std::max(v, Scalar(0)) + std::log1p(std::exp(-std::abs(v)));
}

template <typename Derived>
auto silu(const Eigen::ArrayBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  return a / (Scalar(1) + (-a).exp());
}

template <typename Derived>
auto softplus(const Eigen::ArrayBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  return a.max(Scalar(0)) + (-a.abs()).exp().log1p();
}

template <typename Scalar>
Tensor<Scalar> silu(const Tensor<Scalar>& x) {
  return Tensor<Scalar>(x.shape(), silu(x.values().array()).matrix());
}

template <typename Scalar>
Tensor<Scalar> softplus(const Tensor<Scalar>& x) {
  return Tensor<Scalar>(x.shape(), softplus(x.values().array()).matrix());
}

}  // namespace ssmc

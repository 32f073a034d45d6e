#pragma once

// Deliberately naive reference implementations used as test oracles. Nothing
// here shares code with the library beyond the Tensor container.

#include "ssmcodec/tensor.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace ref {

using ssmc::Index;
using ssmc::Tensor;

template <typename Scalar>
Tensor<Scalar> random_tensor(ssmc::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<Scalar> t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(u(rng));
  return t;
}

template <typename M>
void fill_uniform(M& m, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<typename M::Scalar>(u(rng));
}

/// Direct convolution: out[oy][ox][co] = b[co] + sum x[oy*s-p+ky][ox*s-p+kx][ci] * w[ky][kx][ci][co].
inline Tensor<double> conv2d(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b, Index stride,
                             Index pad) {
  const Index h = x.dim(0), wd = x.dim(1), ci = x.dim(2);
  const Index k = w.dim(0), co = w.dim(3);
  const Index ho = (h + 2 * pad - k) / stride + 1, wo = (wd + 2 * pad - k) / stride + 1;
  Tensor<double> out({ho, wo, co});
  for (Index oy = 0; oy < ho; ++oy)
    for (Index ox = 0; ox < wo; ++ox)
      for (Index o = 0; o < co; ++o) {
        double acc = b[o];
        for (Index ky = 0; ky < k; ++ky)
          for (Index kx = 0; kx < k; ++kx)
            for (Index i = 0; i < ci; ++i) {
              const Index iy = oy * stride - pad + ky, ix = ox * stride - pad + kx;
              if (iy < 0 || ix < 0 || iy >= h || ix >= wd) continue;
              acc += x(iy, ix, i) * w[((ky * k + kx) * ci + i) * co + o];
            }
        out(oy, ox, o) = acc;
      }
  return out;
}

inline Tensor<double> depthwise(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b) {
  const Index h = x.dim(0), wd = x.dim(1), c = x.dim(2), k = w.dim(0), p = k / 2;
  Tensor<double> out({h, wd, c});
  for (Index y = 0; y < h; ++y)
    for (Index xx = 0; xx < wd; ++xx)
      for (Index ch = 0; ch < c; ++ch) {
        double acc = b[ch];
        for (Index ky = 0; ky < k; ++ky)
          for (Index kx = 0; kx < k; ++kx) {
            const Index iy = y + ky - p, ix = xx + kx - p;
            if (iy < 0 || ix < 0 || iy >= h || ix >= wd) continue;
            acc += x(iy, ix, ch) * w[(ky * k + kx) * c + ch];
          }
        out(y, xx, ch) = acc;
      }
  return out;
}

inline Tensor<double> layer_norm(const Tensor<double>& x, const std::vector<double>& g, const std::vector<double>& b,
                                 double eps) {
  Tensor<double> out(x.shape());
  const Index c = x.channels(), n = x.size() / c;
  for (Index t = 0; t < n; ++t) {
    double mean = 0.0;
    for (Index i = 0; i < c; ++i) mean += x[t * c + i];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (Index i = 0; i < c; ++i) var += (x[t * c + i] - mean) * (x[t * c + i] - mean);
    var /= static_cast<double>(c);
    for (Index i = 0; i < c; ++i)
      out[t * c + i] = (x[t * c + i] - mean) / std::sqrt(var + eps) * g[static_cast<std::size_t>(i)] +
                       b[static_cast<std::size_t>(i)];
  }
  return out;
}

/// Selective scan that materializes every hidden state from the closed-form
/// sum h_t = sum_{s<=t} (prod_{s<u<=t} abar_u) bbar_s x_s, with no recurrence.
/// Arguments are L x D (x, delta), L x N (b, c), D x N (a = evolution), D (skip).
template <typename MX, typename MB, typename MA, typename VD>
std::vector<std::vector<double>> explicit_state_scan(const MX& x, const MX& delta, const MB& b, const MB& c,
                                                     const MA& a, const VD& skip) {
  const Index len = x.rows(), d = x.cols(), n = b.cols();
  std::vector<std::vector<double>> y(static_cast<std::size_t>(len), std::vector<double>(static_cast<std::size_t>(d)));
  for (Index t = 0; t < len; ++t)
    for (Index ch = 0; ch < d; ++ch) {
      double acc = static_cast<double>(skip[ch]) * static_cast<double>(x(t, ch));
      for (Index s = 0; s < n; ++s) {
        double h = 0.0;
        for (Index u = 0; u <= t; ++u) {
          const double av = static_cast<double>(a(ch, s)), du = static_cast<double>(delta(u, ch));
          double term = std::expm1(du * av) / av * static_cast<double>(b(u, s)) * static_cast<double>(x(u, ch));
          for (Index v = u + 1; v <= t; ++v) term *= std::exp(static_cast<double>(delta(v, ch)) * av);
          h += term;
        }
        acc += static_cast<double>(c(t, s)) * h;
      }
      y[static_cast<std::size_t>(t)][static_cast<std::size_t>(ch)] = acc;
    }
  return y;
}

}  // namespace ref

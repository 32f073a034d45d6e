#pragma once

// Random parameter generators shared by the unit and acceptance tests.

#include "reference.hpp"
#include "ssmcodec/scan2d.hpp"
#include "ssmcodec/ssm.hpp"
#include "ssmcodec/vss.hpp"

#include <algorithm>
#include <functional>
#include <random>

namespace fixtures {

using ssmc::Index;

template <typename Scalar>
ssmc::ScanParams<Scalar> random_scan_params(Index len, Index d, Index n, std::mt19937_64& rng) {
  ssmc::ScanParams<Scalar> p;
  p.a_log.resize(d, n);
  ref::fill_uniform(p.a_log, rng, -1.5, 1.5);
  p.delta.resize(len, d);
  ref::fill_uniform(p.delta, rng, 0.02, 1.0);
  p.b.resize(len, n);
  ref::fill_uniform(p.b, rng);
  p.c.resize(len, n);
  ref::fill_uniform(p.c, rng);
  p.d_skip.resize(d);
  ref::fill_uniform(p.d_skip, rng);
  return p;
}

template <typename Scalar>
ssmc::RowMatrix<Scalar> random_matrix(Index rows, Index cols, std::mt19937_64& rng, double lo = -1.0,
                                      double hi = 1.0) {
  ssmc::RowMatrix<Scalar> m(rows, cols);
  ref::fill_uniform(m, rng, lo, hi);
  return m;
}

template <typename Scalar>
ssmc::S6Weights<Scalar> random_s6(Index d, Index n, std::mt19937_64& rng) {
  const Index r = ssmc::default_dt_rank(d);
  ssmc::S6Weights<Scalar> w;
  w.x_proj = random_matrix<Scalar>(d, r + 2 * n, rng, -0.5, 0.5);
  w.dt_proj = random_matrix<Scalar>(r, d, rng, -0.5, 0.5);
  w.dt_bias = random_matrix<Scalar>(d, 1, rng, -3.0, -1.0);
  w.a_log = random_matrix<Scalar>(d, n, rng, 0.0, 2.0);
  w.d_skip = random_matrix<Scalar>(d, 1, rng);
  return w;
}

template <typename Scalar>
ssmc::Scan2dWeights<Scalar> random_scan2d(Index d, Index n, std::mt19937_64& rng) {
  return {{random_s6<Scalar>(d, n, rng), random_s6<Scalar>(d, n, rng), random_s6<Scalar>(d, n, rng),
           random_s6<Scalar>(d, n, rng)}};
}

template <typename Scalar>
ssmc::VssLayerWeights<Scalar> random_vss_layer(Index c, Index n, std::mt19937_64& rng) {
  const Index e = 2 * c;
  ssmc::VssLayerWeights<Scalar> w;
  w.ln1 = {random_matrix<Scalar>(c, 1, rng, 0.5, 1.5), random_matrix<Scalar>(c, 1, rng, -0.1, 0.1)};
  w.expand = {random_matrix<Scalar>(c, e, rng, -0.4, 0.4), random_matrix<Scalar>(e, 1, rng, -0.1, 0.1)};
  w.dw_kernel = ref::random_tensor<Scalar>({3, 3, e}, rng, -0.3, 0.3);
  w.dw_bias = ref::random_tensor<Scalar>({e}, rng, -0.1, 0.1);
  w.scan = random_scan2d<Scalar>(e, n, rng);
  w.ln2 = {random_matrix<Scalar>(e, 1, rng, 0.5, 1.5), random_matrix<Scalar>(e, 1, rng, -0.1, 0.1)};
  w.gate = {random_matrix<Scalar>(c, e, rng, -0.4, 0.4), random_matrix<Scalar>(e, 1, rng, -0.1, 0.1)};
  w.project = {random_matrix<Scalar>(e, c, rng, -0.3, 0.3), random_matrix<Scalar>(c, 1, rng, -0.1, 0.1)};
  return w;
}

/// max |a - b| / max |b|, the relative error measure used for scan outputs.
template <typename A, typename B>
double rel_error(const A& a, const B& b) {
  const double scale = std::max(static_cast<double>(b.cwiseAbs().maxCoeff()), 1e-30);
  return static_cast<double>((a - b).cwiseAbs().maxCoeff()) / scale;
}

// Central-difference gradient of f w.r.t. every entry of m.
template <typename M>
M numeric_gradient(M& m, const std::function<double()>& f, double step = 1e-5) {
  M g(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      const double keep = m(i, j);
      m(i, j) = keep + step;
      const double up = f();
      m(i, j) = keep - step;
      const double down = f();
      m(i, j) = keep;
      g(i, j) = (up - down) / (2 * step);
    }
  return g;
}

template <typename A, typename B>
double grad_error(const A& analytic, const B& numeric) {
  const double scale = std::max(numeric.cwiseAbs().maxCoeff(), 1e-8);
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

}  // namespace fixtures

namespace fixtures {

/// S6 output with the projections computed by plain loops and the scan by the
/// explicit-state oracle.
template <typename Scalar>
ssmc::RowMatrix<double> s6_reference(const ssmc::RowMatrix<Scalar>& xs, const ssmc::S6Weights<Scalar>& ws) {
  const ssmc::RowMatrix<double> x = xs.template cast<double>();
  const auto w = ws.template cast<double>();
  const Index len = x.rows(), d = x.cols(), n = w.state_dim(), r = w.dt_rank();
  ssmc::RowMatrix<double> delta(len, d), b(len, n), c(len, n);
  for (Index t = 0; t < len; ++t) {
    for (Index ch = 0; ch < d; ++ch) {
      double pre = w.dt_bias[ch];
      for (Index k = 0; k < r; ++k) {
        double low = 0.0;
        for (Index i = 0; i < d; ++i) low += x(t, i) * w.x_proj(i, k);
        pre += low * w.dt_proj(k, ch);
      }
      delta(t, ch) = pre > 30 ? pre : std::log1p(std::exp(pre));
    }
    for (Index s = 0; s < n; ++s) {
      b(t, s) = c(t, s) = 0.0;
      for (Index i = 0; i < d; ++i) {
        b(t, s) += x(t, i) * w.x_proj(i, r + s);
        c(t, s) += x(t, i) * w.x_proj(i, r + n + s);
      }
    }
  }
  const ssmc::RowMatrix<double> a = -w.a_log.array().exp().matrix();
  const auto y = ref::explicit_state_scan(x, delta, b, c, a, w.d_skip);
  ssmc::RowMatrix<double> out(len, d);
  for (Index t = 0; t < len; ++t)
    for (Index ch = 0; ch < d; ++ch) out(t, ch) = y[static_cast<std::size_t>(t)][static_cast<std::size_t>(ch)];
  return out;
}

/// Visiting order of the four traversals built with explicit nested loops.
inline std::vector<Index> literal_order(int pattern, Index h, Index w) {
  std::vector<Index> order;
  if (pattern < 2) {
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) order.push_back(y * w + x);
  } else {
    for (Index x = 0; x < w; ++x)
      for (Index y = 0; y < h; ++y) order.push_back(y * w + x);
  }
  if (pattern % 2 == 1) std::reverse(order.begin(), order.end());
  return order;
}

/// Literal composition: unfold by loop tables, explicit-state S6, fold, sum.
template <typename Scalar>
ssmc::Tensor<double> scan2d_reference(const ssmc::Tensor<Scalar>& f, const ssmc::Scan2dWeights<Scalar>& w) {
  const Index h = f.height(), wd = f.width(), c = f.channels();
  ssmc::Tensor<double> out({h, wd, c});
  for (int k = 0; k < 4; ++k) {
    const auto order = literal_order(k, h, wd);
    ssmc::RowMatrix<Scalar> seq(h * wd, c);
    for (Index i = 0; i < h * wd; ++i)
      for (Index ch = 0; ch < c; ++ch) seq(i, ch) = f[order[static_cast<std::size_t>(i)] * c + ch];
    const auto y = s6_reference(seq, w.directions[static_cast<std::size_t>(k)]);
    for (Index i = 0; i < h * wd; ++i)
      for (Index ch = 0; ch < c; ++ch) out[order[static_cast<std::size_t>(i)] * c + ch] += y(i, ch);
  }
  return out;
}

}  // namespace fixtures

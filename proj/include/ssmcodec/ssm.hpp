#pragma once

#include "ssmcodec/nn.hpp"
#include "ssmcodec/tensor.hpp"

#include <bit>
#include <cmath>
#include <concepts>
#include <stdexcept>
#include <vector>

namespace ssmc {

/// |delta * A| below which the ZOH input coefficient switches to its series form.
inline constexpr double kZohSeriesThreshold = 1e-6;

template <typename Scalar>
struct Discretized {
  Scalar a_bar;
  Scalar b_bar;
};

/// Zero-order-hold discretization of one diagonal state entry:
/// a_bar = exp(delta*a), b_bar = (exp(delta*a) - 1) / a * b.
template <std::floating_point Scalar>
Discretized<Scalar> discretize(Scalar a, Scalar b, Scalar delta) {
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(delta)) {
    throw std::domain_error("discretize: non-finite input");
  }
  if (!(delta > Scalar(0))) throw std::domain_error("discretize: timescale must be positive");
  const Scalar x = delta * a;
  const Scalar a_bar = std::exp(x);
  if (std::abs(x) < Scalar(kZohSeriesThreshold)) {
    return {a_bar, delta * b * (Scalar(1) + x / Scalar(2))};
  }
  return {a_bar, std::expm1(x) / a * b};
}

/// Inputs of one selective scan over an L-token, D-channel sequence with an
/// N-dimensional diagonal state per channel.
template <typename Scalar>
struct ScanParams {
  RowMatrix<Scalar> a_log;  // D x N, A = -exp(a_log)
  RowMatrix<Scalar> delta;  // L x D, strictly positive
  RowMatrix<Scalar> b;      // L x N
  RowMatrix<Scalar> c;      // L x N
  Vector<Scalar> d_skip;    // D

  Index length() const { return delta.rows(); }
  Index channels() const { return a_log.rows(); }
  Index state_dim() const { return a_log.cols(); }

  RowArray<Scalar> evolution() const { return -a_log.array().exp(); }

  void validate(Index tokens, Index width) const {
    const Index n = state_dim();
    if (channels() != width) {
      throw ShapeError("scan: a_log has " + std::to_string(channels()) + " channels, input has " +
                       std::to_string(width));
    }
    if (delta.rows() != tokens || delta.cols() != width) {
      throw ShapeError("scan: delta must be " + std::to_string(tokens) + "x" + std::to_string(width));
    }
    if (b.rows() != tokens || b.cols() != n || c.rows() != tokens || c.cols() != n) {
      throw ShapeError("scan: B/C must be " + std::to_string(tokens) + "x" + std::to_string(n));
    }
    if (d_skip.size() != width) throw ShapeError("scan: skip length != channel count");
  }
};

namespace detail {

/// Discretized evolution and input coefficient for one token, both D x N.
/// The input term of the recurrence is b_coef(d, n) * B(n) * x(d).
template <typename Scalar, typename DeltaRow>
void zoh_step(const RowArray<Scalar>& a, const DeltaRow& delta_row, RowArray<Scalar>& a_bar,
              RowArray<Scalar>& b_coef) {
  const auto step = delta_row.transpose().array();
  const RowArray<Scalar> x = a.colwise() * step;
  a_bar = x.exp();
  // expm1(x) = (e^x - 1) * x / log(e^x) keeps full precision for small |x|
  // using only vectorized exp/log.
  const auto expm1 = (x.abs() < Scalar(0.5)).select((a_bar - Scalar(1)) * x / a_bar.log(), a_bar - Scalar(1));
  b_coef = (x.abs() < Scalar(kZohSeriesThreshold))
               .select((x * Scalar(0.5) + Scalar(1)).colwise() * step, expm1 / a);
}

// Sequential recurrence over rows [0, L) of the given views, continuing from `state`.
// Works in an N x D layout so every inner loop runs over contiguous channels.
template <typename Scalar, typename X, typename Dl, typename Bm, typename Cm, typename Y>
void sequential_scan(const X& x, const Dl& delta, const Bm& b, const Cm& c, const RowArray<Scalar>& a,
                     const Vector<Scalar>& d_skip, RowArray<Scalar>& state, Y&& y) {
  const Index tokens = x.rows(), n = a.cols();
  const RowArray<Scalar> at = a.transpose();
  RowArray<Scalar> h = state.transpose();
  RowArray<Scalar> xa(at.rows(), at.cols()), a_bar(at.rows(), at.cols()), coef(at.rows(), at.cols());
  Eigen::Array<Scalar, 1, Eigen::Dynamic> yt(at.cols());
  const auto skip = d_skip.transpose().array();
  for (Index t = 0; t < tokens; ++t) {
    const auto step = delta.row(t).array();
    xa = at.rowwise() * step;
    a_bar = xa.exp();
    coef = (xa.abs() < Scalar(kZohSeriesThreshold))
               .select((xa * Scalar(0.5) + Scalar(1)).rowwise() * step,
                       (xa.abs() < Scalar(0.5)).select((a_bar - Scalar(1)) * xa / a_bar.log(), a_bar - Scalar(1)) /
                           at);
    const auto xt = x.row(t).array();
    yt = skip * xt;
    for (Index s = 0; s < n; ++s) {
      h.row(s) = a_bar.row(s) * h.row(s) + coef.row(s) * xt * b(t, s);
      yt += c(t, s) * h.row(s);
    }
    y.row(t) = yt.matrix();
  }
  state = h.transpose();
}

}  // namespace detail

/// Scan continuing from `state` (D x N), which is updated in place. Lets long
/// sequences be processed in chunks.
template <typename Scalar>
RowMatrix<Scalar> selective_scan_resume(const Eigen::Ref<const RowMatrix<Scalar>>& x,
                                        const ScanParams<Scalar>& p, RowArray<Scalar>& state) {
  p.validate(x.rows(), x.cols());
  if (state.rows() != p.channels() || state.cols() != p.state_dim()) {
    throw ShapeError("scan: state must be D x N");
  }
  RowMatrix<Scalar> y(x.rows(), x.cols());
  detail::sequential_scan<Scalar>(x, p.delta, p.b, p.c, p.evolution(), p.d_skip, state, y);
  return y;
}

/// Reference recurrence h_t = a_bar_t h_{t-1} + b_bar_t x_t, y_t = C_t h_t + D x_t, h_0 = 0.
template <typename Scalar>
RowMatrix<Scalar> selective_scan_seq(const Eigen::Ref<const RowMatrix<Scalar>>& x,
                                     const ScanParams<Scalar>& p) {
  RowArray<Scalar> state = RowArray<Scalar>::Zero(p.channels(), p.state_dim());
  return selective_scan_resume<Scalar>(x, p, state);
}

/// Same result as selective_scan_seq, evaluated as a work-efficient
/// (up-sweep / down-sweep) prefix scan over the associative pair operator
/// (a1, b1) o (a2, b2) = (a2 a1, a2 b1 + b2). Operation order depends only on L.
/// Holds O(L * D * N) intermediates.
template <typename Scalar>
RowMatrix<Scalar> selective_scan_par(const Eigen::Ref<const RowMatrix<Scalar>>& x,
                                     const ScanParams<Scalar>& p) {
  p.validate(x.rows(), x.cols());
  const Index tokens = x.rows(), d = p.channels(), n = p.state_dim();
  RowMatrix<Scalar> y(tokens, d);
  if (tokens == 0) return y;
  const RowArray<Scalar> a = p.evolution();
  const auto padded = static_cast<Index>(std::bit_ceil(static_cast<std::size_t>(tokens)));

  std::vector<RowArray<Scalar>> elem_a(tokens), elem_b(tokens);
  RowArray<Scalar> b_coef(d, n);
  for (Index t = 0; t < tokens; ++t) {
    detail::zoh_step(a, p.delta.row(t), elem_a[t], b_coef);
    elem_b[t] = (b_coef.colwise() * x.row(t).transpose().array()).rowwise() * p.b.row(t).array();
  }

  std::vector<RowArray<Scalar>> acc_a(padded, RowArray<Scalar>::Ones(d, n));
  std::vector<RowArray<Scalar>> acc_b(padded, RowArray<Scalar>::Zero(d, n));
  for (Index t = 0; t < tokens; ++t) {
    acc_a[t] = elem_a[t];
    acc_b[t] = elem_b[t];
  }

  // Up-sweep: node i accumulates (left subtree) o (right subtree).
  for (Index stride = 1; stride < padded; stride *= 2) {
    for (Index i = 2 * stride - 1; i < padded; i += 2 * stride) {
      const Index left = i - stride;
      acc_b[i] = acc_a[i] * acc_b[left] + acc_b[i];
      acc_a[i] = acc_a[i] * acc_a[left];
    }
  }

  // Down-sweep: turn subtree sums into exclusive prefixes.
  acc_a[padded - 1].setOnes();
  acc_b[padded - 1].setZero();
  RowArray<Scalar> left_a, left_b;
  for (Index stride = padded / 2; stride >= 1; stride /= 2) {
    for (Index i = 2 * stride - 1; i < padded; i += 2 * stride) {
      const Index left = i - stride;
      left_a = acc_a[left];
      left_b = acc_b[left];
      acc_a[left] = acc_a[i];
      acc_b[left] = acc_b[i];
      acc_b[i] = left_a * acc_b[i] + left_b;
      acc_a[i] = left_a * acc_a[i];
    }
  }

  RowArray<Scalar> h(d, n);
  for (Index t = 0; t < tokens; ++t) {
    h = elem_a[t] * acc_b[t] + elem_b[t];
    y.row(t) = (h.matrix() * p.c.row(t).transpose()).transpose() +
               (p.d_skip.array() * x.row(t).transpose().array()).matrix().transpose();
  }
  return y;
}

template <typename Scalar>
struct ScanGradients {
  RowMatrix<Scalar> dx;       // L x D
  RowMatrix<Scalar> d_delta;  // L x D
  RowMatrix<Scalar> d_b;      // L x N
  RowMatrix<Scalar> d_c;      // L x N
  RowMatrix<Scalar> d_a_log;  // D x N
  Vector<Scalar> d_skip;      // D
};

/// Gradients of sum(dy .* y) with y = selective_scan_seq(x, p), by a
/// reverse-time recurrence over the stored forward states.
template <typename Scalar>
ScanGradients<Scalar> selective_scan_backward(const Eigen::Ref<const RowMatrix<Scalar>>& x,
                                              const ScanParams<Scalar>& p,
                                              const Eigen::Ref<const RowMatrix<Scalar>>& dy) {
  p.validate(x.rows(), x.cols());
  if (dy.rows() != x.rows() || dy.cols() != x.cols()) throw ShapeError("scan backward: dy shape");
  const Index tokens = x.rows(), d = p.channels(), n = p.state_dim();
  const RowArray<Scalar> a = p.evolution();

  std::vector<RowArray<Scalar>> states(tokens);
  RowArray<Scalar> a_bar(d, n), b_coef(d, n);
  RowArray<Scalar> h = RowArray<Scalar>::Zero(d, n);
  for (Index t = 0; t < tokens; ++t) {
    detail::zoh_step(a, p.delta.row(t), a_bar, b_coef);
    h = a_bar * h + (b_coef.colwise() * x.row(t).transpose().array()).rowwise() * p.b.row(t).array();
    states[t] = h;
  }

  ScanGradients<Scalar> g{RowMatrix<Scalar>::Zero(tokens, d), RowMatrix<Scalar>::Zero(tokens, d),
                          RowMatrix<Scalar>::Zero(tokens, n), RowMatrix<Scalar>::Zero(tokens, n),
                          RowMatrix<Scalar>::Zero(d, n), Vector<Scalar>::Zero(d)};
  RowArray<Scalar> d_a = RowArray<Scalar>::Zero(d, n);
  RowArray<Scalar> carry = RowArray<Scalar>::Zero(d, n);  // dL/dh_t arriving from t+1
  RowArray<Scalar> gh(d, n), d_abar(d, n), d_coef(d, n), phi(d, n);
  const RowArray<Scalar> zeros = RowArray<Scalar>::Zero(d, n);

  for (Index t = tokens - 1; t >= 0; --t) {
    detail::zoh_step(a, p.delta.row(t), a_bar, b_coef);
    const auto xt = x.row(t).transpose().array();
    const auto dyt = dy.row(t).transpose().array();
    const auto bt = p.b.row(t).array();
    const auto step = p.delta.row(t).transpose().array();
    const RowArray<Scalar>& h_prev = t > 0 ? states[t - 1] : zeros;

    gh = (dyt.matrix() * p.c.row(t)).array() + carry;
    g.d_c.row(t) = (dy.row(t) * states[t].matrix());
    g.d_skip.array() += dyt * xt;

    // b_bar(d, n) = b_coef(d, n) * B(n); its cotangent is gh * x(d).
    const RowArray<Scalar> d_bbar = gh.colwise() * xt;
    g.dx.row(t) = (dyt * p.d_skip.array() + ((gh * b_coef).rowwise() * bt).rowwise().sum()).matrix().transpose();
    g.d_b.row(t) = (d_bbar * b_coef).colwise().sum().matrix();
    d_abar = gh * h_prev;
    d_coef = d_bbar.rowwise() * bt;

    // d b_coef / dA = delta^2 * (x e^x - e^x + 1) / x^2 with x = delta * A.
    const RowArray<Scalar> xs = a.colwise() * step;
    phi = (xs.abs() < Scalar(1e-3))
              .select(Scalar(0.5) + xs / Scalar(3) + xs.square() / Scalar(8),
                      (xs * a_bar - a_bar + Scalar(1)) / xs.square());
    g.d_delta.row(t) = ((d_abar * a * a_bar + d_coef * a_bar).rowwise().sum()).matrix().transpose();
    d_a += d_abar * (a_bar.colwise() * step) + d_coef * (phi.colwise() * step.square());
    carry = gh * a_bar;
  }
  g.d_a_log = (d_a * a).matrix();
  return g;
}

/// Input-dependent projections of one scan direction. Delta uses a low-rank
/// map (x -> R -> D), B and C are width-N projections of the token.
template <typename Scalar>
struct S6Weights {
  RowMatrix<Scalar> x_proj;   // D x (R + 2N)
  RowMatrix<Scalar> dt_proj;  // R x D
  Vector<Scalar> dt_bias;     // D
  RowMatrix<Scalar> a_log;    // D x N
  Vector<Scalar> d_skip;      // D

  Index channels() const { return a_log.rows(); }
  Index state_dim() const { return a_log.cols(); }
  Index dt_rank() const { return dt_proj.rows(); }

  void validate() const {
    const Index d = channels(), n = state_dim(), r = dt_rank();
    if (x_proj.rows() != d || x_proj.cols() != r + 2 * n) {
      throw ShapeError("s6: x_proj must be " + std::to_string(d) + "x" + std::to_string(r + 2 * n));
    }
    if (dt_proj.cols() != d || dt_bias.size() != d || d_skip.size() != d) {
      throw ShapeError("s6: dt_proj/dt_bias/d_skip width != " + std::to_string(d));
    }
  }

  template <typename Other>
  S6Weights<Other> cast() const {
    return {x_proj.template cast<Other>(), dt_proj.template cast<Other>(),
            dt_bias.template cast<Other>(), a_log.template cast<Other>(),
            d_skip.template cast<Other>()};
  }
};

inline Index default_dt_rank(Index channels) { return (channels + 15) / 16; }

enum class ScanAlgorithm { kSequential, kParallel };

/// Materializes the scan inputs for x: delta = softplus(dt_proj(x_proj_R(x)) + bias).
template <typename Scalar>
ScanParams<Scalar> s6_params(const Eigen::Ref<const RowMatrix<Scalar>>& x, const S6Weights<Scalar>& w) {
  w.validate();
  if (x.cols() != w.channels()) {
    throw ShapeError("s6: token width " + std::to_string(x.cols()) + " != " + std::to_string(w.channels()));
  }
  const Index r = w.dt_rank(), n = w.state_dim();
  const RowMatrix<Scalar> proj = x * w.x_proj;
  ScanParams<Scalar> p;
  p.a_log = w.a_log;
  p.d_skip = w.d_skip;
  p.delta = (proj.leftCols(r) * w.dt_proj).rowwise() + w.dt_bias.transpose();
  p.delta = softplus(p.delta.array()).matrix();
  p.b = proj.middleCols(r, n);
  p.c = proj.rightCols(n);
  return p;
}

/// One selective-scan direction over an L x D token sequence.
template <typename Scalar>
RowMatrix<Scalar> s6_forward(const Eigen::Ref<const RowMatrix<Scalar>>& x, const S6Weights<Scalar>& w,
                             ScanAlgorithm algorithm = ScanAlgorithm::kSequential) {
  if (algorithm == ScanAlgorithm::kParallel) return selective_scan_par<Scalar>(x, s6_params<Scalar>(x, w));

  w.validate();
  if (x.cols() != w.channels()) {
    throw ShapeError("s6: token width " + std::to_string(x.cols()) + " != " + std::to_string(w.channels()));
  }
  // Projections are computed chunk by chunk so the L x D scan inputs are never
  // resident at once.
  constexpr Index kChunk = 2048;
  const Index tokens = x.rows(), r = w.dt_rank(), n = w.state_dim();
  const RowArray<Scalar> a = -w.a_log.array().exp();
  RowArray<Scalar> state = RowArray<Scalar>::Zero(w.channels(), n);
  RowMatrix<Scalar> y(tokens, x.cols());
  RowMatrix<Scalar> proj, delta;
  for (Index t0 = 0; t0 < tokens; t0 += kChunk) {
    const Index len = std::min(kChunk, tokens - t0);
    const auto xs = x.middleRows(t0, len);
    proj.noalias() = xs * w.x_proj;
    delta.noalias() = proj.leftCols(r) * w.dt_proj;
    delta.rowwise() += w.dt_bias.transpose();
    delta = softplus(delta.array()).matrix();
    detail::sequential_scan<Scalar>(xs, delta, proj.middleCols(r, n), proj.rightCols(n), a, w.d_skip,
                                    state, y.middleRows(t0, len));
  }
  return y;
}

}  // namespace ssmc

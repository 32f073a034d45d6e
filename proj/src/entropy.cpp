#include "ssmcodec/entropy.hpp"

#include "ssmcodec/nn.hpp"

#include <algorithm>
#include <numeric>

namespace ssmc {

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_same_shape(const Tensorf& a, const Tensorf& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

}  // namespace

Tensorf quantize(const Tensorf& v, const Tensorf& mu) {
  check_same_shape(v, mu, "quantize");
  Tensorf out(v.shape());
  for (Index i = 0; i < v.size(); ++i) out[i] = round_half_away(v[i] - mu[i]) + mu[i];
  return out;
}

SymbolBlock quantize_symbols(const Tensorf& v, const Tensorf* mu) {
  if (mu != nullptr) check_same_shape(v, *mu, "quantize_symbols");
  SymbolBlock block;
  block.symbols.resize(static_cast<std::size_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i) {
    const float offset = mu != nullptr ? v[i] - (*mu)[i] : v[i];
    const float r = round_half_away(offset);
    std::int32_t k;
    if (!(r >= static_cast<float>(kSymbolMin))) {  // also catches NaN
      k = kSymbolMin;
      ++block.saturated;
    } else if (r > static_cast<float>(kSymbolMax)) {
      k = kSymbolMax;
      ++block.saturated;
    } else {
      k = static_cast<std::int32_t>(r);
    }
    block.symbols[static_cast<std::size_t>(i)] = k;
  }
  return block;
}

Tensorf dequantize(std::span<const std::int32_t> symbols, const Tensorf& mu) {
  if (static_cast<Index>(symbols.size()) != mu.size()) {
    throw ShapeError("dequantize: " + std::to_string(symbols.size()) + " symbols for " + shape_string(mu.shape()));
  }
  Tensorf out(mu.shape());
  for (Index i = 0; i < mu.size(); ++i) out[i] = static_cast<float>(symbols[static_cast<std::size_t>(i)]) + mu[i];
  return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double gaussian_bin_mass(double k, double mu, double sigma) {
  if (!(sigma > 0)) throw std::domain_error("gaussian_bin_mass: sigma must be positive");
  const double upper = (k + 0.5 - mu) / sigma;
  const double lower = (k - 0.5 - mu) / sigma;
  if (lower > 0) return normal_cdf(-lower) - normal_cdf(-upper);
  return normal_cdf(upper) - normal_cdf(lower);
}

std::vector<std::uint32_t> quantize_pmf(std::span<const double> pmf) {
  const auto n = static_cast<std::uint32_t>(pmf.size());
  if (n == 0 || n > kProbabilityScale) throw RangeCoderError("quantize_pmf: alphabet size out of range");
  double total = 0.0;
  for (const double p : pmf) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw RangeCoderError("quantize_pmf: invalid probability");
    total += p;
  }
  if (!(total > 0.0)) throw RangeCoderError("quantize_pmf: zero total mass");

  const double budget = static_cast<double>(kProbabilityScale - n);
  std::vector<std::uint32_t> freq(n);
  std::vector<double> remainder(n);
  std::uint32_t used = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    const double share = pmf[i] / total * budget;
    const double whole = std::floor(share);
    freq[i] = 1 + static_cast<std::uint32_t>(whole);
    remainder[i] = share - whole;
    used += freq[i];
  }
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return remainder[a] > remainder[b]; });
  for (std::uint32_t i = 0; used < kProbabilityScale; i = (i + 1) % n, ++used) ++freq[order[i]];
  return freq;
}

GaussianConditional::GaussianConditional() {
  const double lo = std::log(kScaleMin), hi = std::log(kScaleTableMax);
  scales_.resize(kScaleLevels);
  for (int j = 0; j < kScaleLevels; ++j) scales_[static_cast<std::size_t>(j)] = std::exp(lo + (hi - lo) * j / (kScaleLevels - 1));
  scales_.front() = kScaleMin;
  scales_.back() = kScaleTableMax;
  tables_.reserve(kScaleLevels);
  for (int j = 0; j < kScaleLevels; ++j) {
    const auto p = pmf(j);
    tables_.push_back(CdfTable::from_frequencies(kSymbolMin, quantize_pmf(p)));
  }
}

std::int32_t GaussianConditional::scale_index(double sigma) const {
  const auto it = std::lower_bound(scales_.begin(), scales_.end(), sigma);
  if (it == scales_.end()) return kScaleLevels - 1;
  return static_cast<std::int32_t>(it - scales_.begin());
}

std::vector<std::int32_t> GaussianConditional::scale_indexes(const Tensorf& sigma) const {
  std::vector<std::int32_t> out(static_cast<std::size_t>(sigma.size()));
  for (Index i = 0; i < sigma.size(); ++i) out[static_cast<std::size_t>(i)] = scale_index(sigma[i]);
  return out;
}

std::vector<double> GaussianConditional::pmf(std::int32_t index) const {
  const double sigma = scales_.at(static_cast<std::size_t>(index));
  std::vector<double> p(kAlphabetSize);
  for (int i = 0; i < kAlphabetSize; ++i) p[static_cast<std::size_t>(i)] = gaussian_bin_mass(kSymbolMin + i, 0.0, sigma);
  const double tail = normal_cdf((kSymbolMin + 0.5) / sigma);
  p.front() = tail;
  p.back() = tail;
  return p;
}

FactorizedPrior::FactorizedPrior(std::vector<Channel> channels) : channels_(std::move(channels)) {
  weights_.resize(channels_.size());
  gates_.resize(channels_.size());
  for (std::size_t c = 0; c < channels_.size(); ++c) {
    const Channel& ch = channels_[c];
    for (int k = 0; k < kLayers; ++k) {
      const Index out = kFilters[static_cast<std::size_t>(k) + 1], in = kFilters[static_cast<std::size_t>(k)];
      if (ch.matrices[k].rows() != out || ch.matrices[k].cols() != in || ch.biases[k].size() != out) {
        throw ShapeError("factorized prior: layer " + std::to_string(k) + " of channel " + std::to_string(c) +
                         " has the wrong shape");
      }
      weights_[c][k] = ch.matrices[k].unaryExpr([](double v) { return softplus(v); });
      if (k < kLayers - 1) {
        if (ch.factors[k].size() != out) throw ShapeError("factorized prior: factor shape");
        gates_[c][k] = ch.factors[k].array().tanh().matrix();
      }
    }
  }
  tables_.reserve(channels_.size());
  for (Index c = 0; c < this->channels(); ++c) {
    tables_.push_back(CdfTable::from_frequencies(kSymbolMin, quantize_pmf(pmf(c))));
  }
}

double FactorizedPrior::logits(Index c, double x) const {
  const auto ci = static_cast<std::size_t>(c);
  const Channel& ch = channels_.at(ci);
  Eigen::VectorXd v = Eigen::VectorXd::Constant(1, x);
  for (int k = 0; k < kLayers; ++k) {
    v = weights_[ci][k] * v + ch.biases[k];
    if (k < kLayers - 1) v.array() += gates_[ci][k].array() * v.array().tanh();
  }
  return v[0];
}

double FactorizedPrior::cdf(Index c, double x) const { return sigmoid(logits(c, x)); }

double FactorizedPrior::bin_mass(Index c, double k) const {
  const double lower = logits(c, k - 0.5), upper = logits(c, k + 0.5);
  // Reflect into the lower tail, where sigmoid differences keep precision.
  const double sign = lower + upper > 0 ? -1.0 : 1.0;
  return std::abs(sigmoid(sign * upper) - sigmoid(sign * lower));
}

std::vector<double> FactorizedPrior::pmf(Index c) const {
  std::vector<double> p(kAlphabetSize);
  for (int i = 1; i + 1 < kAlphabetSize; ++i) p[static_cast<std::size_t>(i)] = bin_mass(c, kSymbolMin + i);
  p.front() = sigmoid(logits(c, kSymbolMin + 0.5));
  p.back() = sigmoid(-logits(c, kSymbolMax - 0.5));
  return p;
}

double estimate_bits(std::span<const double> masses) {
  double bits = 0.0;
  for (const double m : masses) bits -= std::log2(m);
  return bits;
}

double estimate_bits(std::span<const std::int32_t> symbols, std::span<const std::int32_t> indexes,
                     std::span<const CdfTable> tables) {
  if (symbols.size() != indexes.size()) throw RangeCoderError("estimate_bits: one table index per symbol required");
  double bits = 0.0;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const CdfTable& t = tables[static_cast<std::size_t>(indexes[i])];
    bits -= std::log2(t.probability(symbols[i]));
  }
  return bits;
}

double rd_loss(const Tensorf& x, const Tensorf& x_hat, double bits_y, double bits_z, double lambda,
               double pixel_count) {
  check_same_shape(x, x_hat, "rd_loss");
  if (!(pixel_count > 0)) throw std::domain_error("rd_loss: pixel count must be positive");
  const double mse = x.size() == 0 ? 0.0
                                   : (x.values().cast<double>() - x_hat.values().cast<double>()).squaredNorm() /
                                         static_cast<double>(x.size());
  return lambda * 255.0 * 255.0 * mse + (bits_y + bits_z) / pixel_count;
}

}  // namespace ssmc

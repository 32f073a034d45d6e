#include "ssmcodec/model.hpp"

#include "ssmcodec/bytes.hpp"

namespace ssmc {

namespace {

RowMatrix<float> matrix(const Tensorf& t) {
  if (t.rank() != 2) throw FormatError("weights: expected a matrix, got " + shape_string(t.shape()));
  return Eigen::Map<const RowMatrix<float>>(t.data(), t.dim(0), t.dim(1));
}

Vector<float> vector(const Tensorf& t) { return t.values(); }

class Loader {
 public:
  Loader(const WeightStore& store, const TransformConfig& config) : store_(store), config_(config) {}

  ConvLayer conv(const std::string& p, Index in, Index out, bool up) const {
    const Index k = config_.conv_kernel, pad = k / 2;
    ConvLayer layer{store_.get(p + ".weight"), store_.get(p + ".bias"),
                    up ? ConvSpec::up(k, 2, pad, 1, in, out) : ConvSpec::down(k, 2, pad, in, out)};
    return layer;
  }

  DenseLayer dense(const std::string& p) const {
    return {matrix(store_.get(p + ".weight")), vector(store_.get(p + ".bias"))};
  }

  S6Weights<float> s6(const std::string& p) const {
    return {matrix(store_.get(p + ".x_proj")), matrix(store_.get(p + ".dt_proj")), vector(store_.get(p + ".dt_bias")),
            matrix(store_.get(p + ".a_log")), vector(store_.get(p + ".d_skip"))};
  }

  VssBlock block(const std::string& p, Index channels, Index layers) const {
    VssBlock b{{layers, channels}, {}};
    for (Index j = 0; j < layers; ++j) {
      const std::string l = p + ".layer" + std::to_string(j);
      VssLayerWeights<float> w;
      w.ln1 = {vector(store_.get(l + ".ln1.weight")), vector(store_.get(l + ".ln1.bias"))};
      const DenseLayer expand = dense(l + ".expand");
      w.expand = {expand.weight, expand.bias};
      w.dw_kernel = store_.get(l + ".dwconv.weight");
      w.dw_bias = store_.get(l + ".dwconv.bias");
      if (config_.tied_directions) {
        w.scan = Scan2dWeights<float>::tied(s6(l + ".scan.shared"));
      } else {
        for (std::size_t d = 0; d < 4; ++d) w.scan.directions[d] = s6(l + ".scan.dir" + std::to_string(d));
      }
      w.ln2 = {vector(store_.get(l + ".ln2.weight")), vector(store_.get(l + ".ln2.bias"))};
      const DenseLayer gate = dense(l + ".gate"), project = dense(l + ".project");
      w.gate = {gate.weight, gate.bias};
      w.project = {project.weight, project.bias};
      w.validate();
      b.layers.push_back(std::move(w));
    }
    return b;
  }

  FactorizedPrior prior() const {
    const Index c6 = config_.hyper_channels();
    std::vector<FactorizedPrior::Channel> channels(static_cast<std::size_t>(c6));
    for (int k = 0; k < FactorizedPrior::kLayers; ++k) {
      const Tensorf& m = store_.get("hyper_prior.matrix" + std::to_string(k));
      const Tensorf& b = store_.get("hyper_prior.bias" + std::to_string(k));
      const Index out = m.dim(1), in = m.dim(2);
      for (Index c = 0; c < c6; ++c) {
        auto& ch = channels[static_cast<std::size_t>(c)];
        ch.matrices[k].resize(out, in);
        for (Index o = 0; o < out; ++o)
          for (Index i = 0; i < in; ++i) ch.matrices[k](o, i) = m[(c * out + o) * in + i];
        ch.biases[k].resize(out);
        for (Index o = 0; o < out; ++o) ch.biases[k][o] = b[c * out + o];
        if (k < FactorizedPrior::kLayers - 1) {
          const Tensorf& f = store_.get("hyper_prior.factor" + std::to_string(k));
          ch.factors[k].resize(out);
          for (Index o = 0; o < out; ++o) ch.factors[k][o] = f[c * out + o];
        }
      }
    }
    return FactorizedPrior(std::move(channels));
  }

 private:
  const WeightStore& store_;
  const TransformConfig& config_;
};

Tensorf bounded_scale(const Tensorf& raw) {
  Tensorf s(raw.shape());
  s.values() = softplus(raw.values().array()).max(static_cast<float>(kScaleMin)).matrix();
  return s;
}

void require_divisible(const Tensorf& x, Index factor, const char* op) {
  if (x.rank() != 3 || x.height() % factor != 0 || x.width() % factor != 0 || x.height() == 0 || x.width() == 0) {
    throw ShapeError(std::string(op) + ": extents of " + shape_string(x.shape()) + " must be positive multiples of " +
                     std::to_string(factor) + " (pad the input first)");
  }
}

}  // namespace

CodecModel::CodecModel(const WeightStore& store, ScanAlgorithm algorithm)
    : config_(store.config()), fingerprint_(store.fingerprint()), algorithm_(algorithm) {
  store.validate();
  const Loader load(store, config_);
  const auto& ch = config_.channels;
  const std::array<Index, 5> ga{3, ch[0], ch[1], ch[2], ch[3]};
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string n = std::to_string(i);
    g_a_.push_back({load.conv("g_a.conv" + n, ga[i], ga[i + 1], false),
                    load.block("g_a.vss" + n, ga[i + 1], config_.layers[i])});
    const std::size_t stage = 3 - i;
    g_s_.push_back({load.conv("g_s.deconv" + n, ga[stage + 1], ga[stage], true),
                    load.block("g_s.vss" + n, ga[stage + 1], config_.layers[stage])});
  }
  h_a_.push_back({load.conv("h_a.conv0", ch[3], ch[4], false), load.block("h_a.vss0", ch[4], config_.hyper_layers)});
  h_a_.push_back({load.conv("h_a.conv1", ch[4], ch[5], false), load.block("h_a.vss1", ch[5], config_.hyper_layers)});
  h_s_.push_back({load.conv("h_s.deconv0", ch[5], ch[4], true), load.block("h_s.vss0", ch[4], config_.hyper_layers)});
  h_s_.push_back({load.conv("h_s.deconv1", ch[4], ch[4], true), load.block("h_s.vss1", ch[4], config_.hyper_layers)});
  h_s_mean_ = load.dense("h_s.mean");
  h_s_scale_ = load.dense("h_s.scale");
  for (Index i = 0; i < config_.slices; ++i) {
    const std::string s = "cam.slice" + std::to_string(i);
    slices_.push_back({load.dense(s + ".params.conv0"), load.dense(s + ".params.conv1"),
                       load.dense(s + ".residual.conv0"), load.dense(s + ".residual.conv1")});
  }
  prior_ = load.prior();
}

Tensorf CodecModel::analysis(const Tensorf& x) const {
  require_divisible(x, TransformConfig::kLatentStride, "analysis");
  if (x.channels() != 3) throw ShapeError("analysis: expected 3 input channels, got " + std::to_string(x.channels()));
  Tensorf f = x;
  for (const Stage& s : g_a_) f = s.block.forward(s.conv.forward(f), algorithm_);
  return f;
}

Tensorf CodecModel::hyper_analysis(const Tensorf& y) const {
  require_divisible(y, 4, "hyper_analysis");
  Tensorf f = y;
  for (const Stage& s : h_a_) f = s.block.forward(s.conv.forward(f), algorithm_);
  return f;
}

HyperOutput CodecModel::hyper_synthesis(const Tensorf& z_hat) const {
  Tensorf f = z_hat;
  for (const Stage& s : h_s_) f = s.block.forward(s.conv.forward(f), algorithm_);
  return {h_s_mean_.forward(f), bounded_scale(h_s_scale_.forward(f))};
}

Tensorf CodecModel::synthesis(const Tensorf& y_bar) const {
  if (y_bar.rank() != 3 || y_bar.channels() != config_.latent_channels()) {
    throw ShapeError("synthesis: expected h x w x " + std::to_string(config_.latent_channels()) + ", got " +
                     shape_string(y_bar.shape()));
  }
  Tensorf f = y_bar;
  for (const Stage& s : g_s_) f = s.conv.forward(s.block.forward(f, algorithm_));
  return f;
}

Tensorf CodecModel::slice_context(const HyperOutput& hyper, std::span<const Tensorf> previous,
                                  const Tensorf* extra) const {
  std::vector<const Tensorf*> parts{&hyper.mean, &hyper.scale};
  for (const Tensorf& p : previous) parts.push_back(&p);
  if (extra != nullptr) parts.push_back(extra);
  return concat_channels(parts);
}

SliceParams CodecModel::slice_params(Index slice, const HyperOutput& hyper, std::span<const Tensorf> previous) const {
  if (slice < 0 || slice >= config_.slices) throw std::out_of_range("slice index " + std::to_string(slice) + " out of range");
  if (static_cast<Index>(previous.size()) != slice) {
    throw ShapeError("slice " + std::to_string(slice) + " needs " + std::to_string(slice) + " previous slices, got " +
                     std::to_string(previous.size()));
  }
  const SliceNet& net = slices_[static_cast<std::size_t>(slice)];
  const Tensorf hidden = silu(net.params0.forward(slice_context(hyper, previous, nullptr)));
  const Tensorf out = net.params1.forward(hidden);
  const Index ms = config_.slice_channels();
  return {slice_channels(out, 0, ms), bounded_scale(slice_channels(out, ms, ms))};
}

Tensorf CodecModel::slice_residual(Index slice, const HyperOutput& hyper, std::span<const Tensorf> previous,
                                   const Tensorf& y_hat) const {
  if (slice < 0 || slice >= config_.slices) throw std::out_of_range("slice index " + std::to_string(slice) + " out of range");
  const SliceNet& net = slices_[static_cast<std::size_t>(slice)];
  const Tensorf hidden = silu(net.residual0.forward(slice_context(hyper, previous, &y_hat)));
  return net.residual1.forward(hidden);
}

namespace {

CamSlice finish_slice(const CodecModel& model, Index slice, const HyperOutput& hyper, std::span<const Tensorf> previous,
                      SliceParams params, SymbolBlock symbols) {
  CamSlice out;
  out.y_hat = dequantize(symbols.symbols, params.mean);
  out.residual = model.slice_residual(slice, hyper, previous, out.y_hat);
  out.y_bar = out.y_hat;
  out.y_bar.values() += out.residual.values();
  out.params = std::move(params);
  out.symbols = std::move(symbols);
  return out;
}

}  // namespace

CamSlice cam_slice(const CodecModel& model, Index slice, const HyperOutput& hyper, std::span<const Tensorf> previous,
                   const Tensorf& y_i) {
  SliceParams params = model.slice_params(slice, hyper, previous);
  SymbolBlock symbols = quantize_symbols(y_i, &params.mean);
  return finish_slice(model, slice, hyper, previous, std::move(params), std::move(symbols));
}

CamSlice cam_slice_decode(const CodecModel& model, Index slice, const HyperOutput& hyper,
                          std::span<const Tensorf> previous, std::span<const std::int32_t> symbols) {
  SliceParams params = model.slice_params(slice, hyper, previous);
  SymbolBlock block{{symbols.begin(), symbols.end()}, 0};
  return finish_slice(model, slice, hyper, previous, std::move(params), std::move(block));
}

}  // namespace ssmc

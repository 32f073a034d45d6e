#pragma once

#include "ssmcodec/nn.hpp"
#include "ssmcodec/scan2d.hpp"
#include "ssmcodec/tensor.hpp"

#include <span>
#include <string>
#include <vector>

namespace ssmc {

template <typename Scalar>
struct LayerNormParams {
  Vector<Scalar> gamma;
  Vector<Scalar> beta;
};

template <typename Scalar>
struct LinearParams {
  RowMatrix<Scalar> weight;  // C_in x C_out
  Vector<Scalar> bias;
};

/// Parameters of one gated two-branch VSS layer of width C and hidden width E:
///   hidden = LN2(scan2d(silu(dwconv(expand(LN1(f))))))
///   gate   = silu(gate(LN1(f)))
///   out    = project(hidden .* gate) + f
template <typename Scalar>
struct VssLayerWeights {
  LayerNormParams<Scalar> ln1;      // C
  LinearParams<Scalar> expand;      // C -> E
  Tensor<Scalar> dw_kernel;         // k x k x E
  Tensor<Scalar> dw_bias;           // E
  Scan2dWeights<Scalar> scan;       // width E
  LayerNormParams<Scalar> ln2;      // E
  LinearParams<Scalar> gate;        // C -> E
  LinearParams<Scalar> project;     // E -> C

  Index channels() const { return expand.weight.rows(); }
  Index hidden() const { return expand.weight.cols(); }

  void validate() const {
    const Index c = channels(), e = hidden();
    if (gate.weight.rows() != c || gate.weight.cols() != e) {
      throw ShapeError("vss: gate projection must be " + std::to_string(c) + "x" + std::to_string(e));
    }
    if (project.weight.rows() != e || project.weight.cols() != c) {
      throw ShapeError("vss: output projection must be " + std::to_string(e) + "x" + std::to_string(c));
    }
    if (ln1.gamma.size() != c || ln2.gamma.size() != e) throw ShapeError("vss: layer norm widths");
    for (const auto& d : scan.directions) {
      if (d.channels() != e) throw ShapeError("vss: scan width != hidden width");
    }
  }
};

struct VssBlockConfig {
  Index layers = 1;
  Index channels = 0;
};

template <typename Scalar>
Tensor<Scalar> vss_layer_forward(const Tensor<Scalar>& f_in, const VssLayerWeights<Scalar>& w,
                                 ScanAlgorithm algorithm = ScanAlgorithm::kSequential) {
  w.validate();
  if (f_in.rank() != 3 || f_in.channels() != w.channels()) {
    throw ShapeError("vss layer: input " + shape_string(f_in.shape()) + " does not have " +
                     std::to_string(w.channels()) + " channels");
  }
  const Tensor<Scalar> normed = layer_norm<Scalar>(f_in, w.ln1.gamma, w.ln1.beta);

  Tensor<Scalar> hidden = linear<Scalar>(normed, w.expand.weight, w.expand.bias);
  hidden = depthwise_conv2d(hidden, w.dw_kernel, w.dw_bias);
  hidden.values().array() = silu(hidden.values().array());
  hidden = scan2d(hidden, w.scan, algorithm);
  hidden = layer_norm<Scalar>(hidden, w.ln2.gamma, w.ln2.beta);

  Tensor<Scalar> gate = linear<Scalar>(normed, w.gate.weight, w.gate.bias);
  hidden.values().array() *= silu(gate.values().array());

  Tensor<Scalar> out = linear<Scalar>(hidden, w.project.weight, w.project.bias);
  out.values() += f_in.values();
  return out;
}

template <typename Scalar>
Tensor<Scalar> vss_block_forward(const Tensor<Scalar>& f_in, const VssBlockConfig& cfg,
                                 std::span<const VssLayerWeights<Scalar>> layers,
                                 ScanAlgorithm algorithm = ScanAlgorithm::kSequential) {
  if (cfg.layers < 1) throw ShapeError("vss block: layer count must be >= 1");
  if (static_cast<Index>(layers.size()) != cfg.layers) {
    throw ShapeError("vss block: expected " + std::to_string(cfg.layers) + " layer weight sets, got " +
                     std::to_string(layers.size()));
  }
  if (f_in.channels() != cfg.channels) {
    throw ShapeError("vss block: input channels " + std::to_string(f_in.channels()) + " != " +
                     std::to_string(cfg.channels));
  }
  Tensor<Scalar> f = vss_layer_forward(f_in, layers[0], algorithm);
  for (std::size_t i = 1; i < layers.size(); ++i) f = vss_layer_forward(f, layers[i], algorithm);
  return f;
}

}  // namespace ssmc

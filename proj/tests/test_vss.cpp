#include "fixtures.hpp"
#include "ssmcodec/vss.hpp"

#include <gtest/gtest.h>

using namespace ssmc;

TEST(VssLayer, ZeroOutputProjectionIsResidual) {
  std::mt19937_64 rng(41);
  auto w = fixtures::random_vss_layer<float>(4, 3, rng);
  w.project.weight.setZero();
  w.project.bias.setZero();
  const auto f = ref::random_tensor<float>({5, 6, 4}, rng);
  EXPECT_EQ(vss_layer_forward(f, w), f);
}

TEST(VssLayer, SaturatedGateLeavesInputNearlyUnchanged) {
  std::mt19937_64 rng(42);
  auto w = fixtures::random_vss_layer<double>(4, 3, rng);
  w.gate.weight.setZero();
  w.gate.bias.setConstant(-30.0);
  w.project.bias.setZero();
  EXPECT_NEAR(silu(-30.0), -30.0 / (1.0 + std::exp(30.0)), 1e-25);
  const auto f = ref::random_tensor<double>({4, 4, 4}, rng);
  const auto out = vss_layer_forward(f, w);
  EXPECT_LT((out.values() - f.values()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NE(out, f);
}

TEST(VssLayer, ShapeContract) {
  std::mt19937_64 rng(43);
  const auto w = fixtures::random_vss_layer<float>(16, 4, rng);
  const auto out = vss_layer_forward(ref::random_tensor<float>({8, 8, 16}, rng), w);
  EXPECT_EQ(out.shape(), (Shape{8, 8, 16}));
  EXPECT_TRUE(out.all_finite());
  EXPECT_THROW(vss_layer_forward(ref::random_tensor<float>({8, 8, 15}, rng), w), ShapeError);
}

TEST(VssLayer, MatchesStepByStepEvaluation) {
  std::mt19937_64 rng(44);
  const auto w = fixtures::random_vss_layer<double>(3, 2, rng);
  const auto f = ref::random_tensor<double>({4, 5, 3}, rng);
  std::vector<double> g1(w.ln1.gamma.data(), w.ln1.gamma.data() + 3), b1(w.ln1.beta.data(), w.ln1.beta.data() + 3);
  std::vector<double> g2(w.ln2.gamma.data(), w.ln2.gamma.data() + 6), b2(w.ln2.beta.data(), w.ln2.beta.data() + 6);
  const auto normed = ref::layer_norm(f, g1, b1, 1e-5);
  auto dense = [](const Tensor<double>& x, const RowMatrix<double>& m, const Vector<double>& b) {
    Tensor<double> out({x.height(), x.width(), m.cols()});
    for (Index t = 0; t < x.height() * x.width(); ++t)
      for (Index o = 0; o < m.cols(); ++o) {
        double acc = b[o];
        for (Index i = 0; i < m.rows(); ++i) acc += x[t * m.rows() + i] * m(i, o);
        out[t * m.cols() + o] = acc;
      }
    return out;
  };
  auto hidden = ref::depthwise(dense(normed, w.expand.weight, w.expand.bias), w.dw_kernel, w.dw_bias);
  for (Index i = 0; i < hidden.size(); ++i) hidden[i] = hidden[i] / (1.0 + std::exp(-hidden[i]));
  hidden = ref::layer_norm(fixtures::scan2d_reference(hidden, w.scan), g2, b2, 1e-5);
  const auto gate = dense(normed, w.gate.weight, w.gate.bias);
  for (Index i = 0; i < hidden.size(); ++i) hidden[i] *= gate[i] / (1.0 + std::exp(-gate[i]));
  auto expected = dense(hidden, w.project.weight, w.project.bias);
  expected.values() += f.values();
  EXPECT_LT(fixtures::rel_error(vss_layer_forward(f, w).values(), expected.values()), 1e-10);
}

TEST(VssBlock, SingleLayerReducesToLayer) {
  std::mt19937_64 rng(45);
  const std::vector<VssLayerWeights<float>> layers{fixtures::random_vss_layer<float>(4, 2, rng)};
  const auto f = ref::random_tensor<float>({3, 3, 4}, rng);
  EXPECT_EQ(vss_block_forward<float>(f, {1, 4}, layers), vss_layer_forward(f, layers[0]));
}

TEST(VssBlock, ZeroedProjectionsStackToIdentity) {
  std::mt19937_64 rng(46);
  for (const Index count : {1, 2, 3}) {
    std::vector<VssLayerWeights<float>> layers;
    for (Index i = 0; i < count; ++i) {
      layers.push_back(fixtures::random_vss_layer<float>(4, 2, rng));
      layers.back().project.weight.setZero();
      layers.back().project.bias.setZero();
    }
    const auto f = ref::random_tensor<float>({4, 3, 4}, rng);
    EXPECT_EQ(vss_block_forward<float>(f, {count, 4}, layers), f);
  }
}

TEST(VssBlock, ThreeLayersEqualManualComposition) {
  std::mt19937_64 rng(47);
  std::vector<VssLayerWeights<float>> layers;
  for (int i = 0; i < 3; ++i) layers.push_back(fixtures::random_vss_layer<float>(4, 2, rng));
  const auto f = ref::random_tensor<float>({4, 4, 4}, rng);
  const auto manual = vss_layer_forward(vss_layer_forward(vss_layer_forward(f, layers[0]), layers[1]), layers[2]);
  EXPECT_EQ(vss_block_forward<float>(f, {3, 4}, layers), manual);
  EXPECT_EQ(vss_block_forward<float>(f, {3, 4}, layers), vss_block_forward<float>(f, {3, 4}, layers));
}

TEST(VssBlock, WeightCountMismatchFails) {
  std::mt19937_64 rng(48);
  const std::vector<VssLayerWeights<float>> layers{fixtures::random_vss_layer<float>(4, 2, rng)};
  EXPECT_THROW(vss_block_forward<float>(Tensorf({2, 2, 4}), {2, 4}, layers), ShapeError);
  EXPECT_THROW(vss_block_forward<float>(Tensorf({2, 2, 4}), {0, 4}, {}), ShapeError);
}

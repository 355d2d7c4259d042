#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <limits>

#include "dnncov/error.hpp"
#include "dnncov/model.hpp"
#include "dnncov/tensor.hpp"

using namespace dnncov;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected dnncov::Error";
  return ErrorCode::kIo;
}

NetworkModel dense_chain(const std::vector<std::size_t>& widths, Activation hidden, Activation head) {
  std::vector<LayerSpec> layers;
  std::vector<Tensor> w, b;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    layers.push_back(LayerSpec::dense(widths[k], widths[k + 1], k + 2 == widths.size() ? head : hidden));
    w.emplace_back(Shape{widths[k + 1], widths[k]});
    b.emplace_back(Shape{widths[k + 1]});
  }
  return NetworkModel::create("chain", {widths.front()}, layers, w, b);
}

}  // namespace

TEST(Tensor, RejectsNonFinite) {
  EXPECT_EQ(code_of([] { Tensor({2}, {1.0, std::nan("")}); }), ErrorCode::kNumeric);
  EXPECT_EQ(code_of([] { Tensor({1}, {std::numeric_limits<double>::infinity()}); }), ErrorCode::kNumeric);
}

TEST(Tensor, ShapeAndLength) {
  EXPECT_EQ(code_of([] { Tensor({2, 2}, {1, 2, 3}); }), ErrorCode::kShapeMismatch);
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.reshaped({6}).shape(), Shape{6});
  EXPECT_EQ(code_of([&] { (void)t.reshaped({4}); }), ErrorCode::kShapeMismatch);
  EXPECT_EQ(shape_to_string({1, 28, 28}), "[1, 28, 28]");
}

TEST(Model, DefaultCoverageLayersSkipSoftmax) {
  auto m = dense_chain({4, 5, 3, 2}, Activation::kRelu, Activation::kSoftmax);
  EXPECT_EQ(m.coverage_layers(), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(m.coverage_layer_sizes(), (std::vector<std::size_t>{5, 3}));
  EXPECT_EQ(m.class_count(), 2u);
  EXPECT_TRUE(m.ends_in_softmax());

  auto plain = dense_chain({4, 5, 3}, Activation::kTanh, Activation::kIdentity);
  EXPECT_EQ(plain.coverage_layers(), (std::vector<std::size_t>{0, 1}));
}

TEST(Model, SeparateActivationLayerReplacesIdentityOutput) {
  std::vector<LayerSpec> layers = {LayerSpec::dense(3, 4, Activation::kIdentity),
                                   LayerSpec::activation_layer(Activation::kRelu),
                                   LayerSpec::dense(4, 2, Activation::kSoftmax)};
  EXPECT_EQ(NetworkModel::default_coverage_layers(layers), (std::vector<std::size_t>{1}));
}

TEST(Model, ConvChainShapes) {
  std::vector<LayerSpec> layers = {LayerSpec::conv2d({1, 6, 5, 5, 1, 2}, Activation::kRelu),
                                   LayerSpec::max_pool(2, 2),
                                   LayerSpec::conv2d({6, 16, 5, 5, 1, 0}, Activation::kRelu),
                                   LayerSpec::max_pool(2, 2), LayerSpec::flatten(),
                                   LayerSpec::dense(16 * 5 * 5, 10, Activation::kSoftmax)};
  std::vector<Tensor> w = {Tensor({6, 1, 5, 5}), Tensor(), Tensor({16, 6, 5, 5}), Tensor(), Tensor(),
                           Tensor({10, 400})};
  std::vector<Tensor> b = {Tensor({6}), Tensor(), Tensor({16}), Tensor(), Tensor(), Tensor({10})};
  auto m = NetworkModel::create("lenet", {1, 28, 28}, layers, w, b);
  EXPECT_EQ(m.layer_output_shape(0), (Shape{6, 28, 28}));
  EXPECT_EQ(m.layer_output_shape(3), (Shape{16, 5, 5}));
  EXPECT_EQ(m.coverage_layer_sizes(), (std::vector<std::size_t>{6, 16}));
  EXPECT_EQ(m.total_neurons(), 22u);
}

TEST(Model, RejectsStructuralErrors) {
  // wrong weight shape
  EXPECT_EQ(code_of([] {
              NetworkModel::create("x", {3}, {LayerSpec::dense(3, 2, Activation::kRelu)}, {Tensor({3, 2})},
                                   {Tensor({2})});
            }),
            ErrorCode::kShapeMismatch);
  // chain mismatch
  EXPECT_EQ(code_of([] {
              NetworkModel::create("x", {3},
                                   {LayerSpec::dense(3, 2, Activation::kRelu), LayerSpec::dense(4, 2, Activation::kRelu)},
                                   {Tensor({2, 3}), Tensor({2, 4})}, {Tensor({2}), Tensor({2})});
            }),
            ErrorCode::kShapeMismatch);
  // softmax in the middle
  EXPECT_THROW(NetworkModel::create(
                   "x", {3}, {LayerSpec::dense(3, 2, Activation::kSoftmax), LayerSpec::dense(2, 2, Activation::kRelu)},
                   {Tensor({2, 3}), Tensor({2, 2})}, {Tensor({2}), Tensor({2})}),
               Error);
  // coverage layers not increasing
  EXPECT_THROW(NetworkModel::create(
                   "x", {3}, {LayerSpec::dense(3, 2, Activation::kRelu), LayerSpec::dense(2, 2, Activation::kRelu)},
                   {Tensor({2, 3}), Tensor({2, 2})}, {Tensor({2}), Tensor({2})}, {1, 0}),
               Error);
}

TEST(Model, CheckNeuron) {
  auto m = dense_chain({4, 5, 3, 2}, Activation::kRelu, Activation::kSoftmax);
  EXPECT_NO_THROW(m.check({1, 2}));
  EXPECT_EQ(code_of([&] { m.check({1, 3}); }), ErrorCode::kInvalidNeuron);
  EXPECT_EQ(code_of([&] { m.check({2, 0}); }), ErrorCode::kInvalidNeuron);
}

TEST(Model, NameRoundTrip) {
  for (auto fn : {Activation::kIdentity, Activation::kRelu, Activation::kTanh, Activation::kSigmoid,
                  Activation::kSoftmax})
    EXPECT_EQ(parse_activation(to_string(fn)), fn);
  for (auto k : {LayerKind::kDense, LayerKind::kConv2d, LayerKind::kMaxPool2d, LayerKind::kAvgPool2d,
                 LayerKind::kFlatten, LayerKind::kActivation})
    EXPECT_EQ(parse_layer_kind(to_string(k)), k);
  EXPECT_EQ(code_of([] { parse_layer_kind("lstm"); }), ErrorCode::kUnsupported);
}

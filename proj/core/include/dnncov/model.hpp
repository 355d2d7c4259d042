#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dnncov/tensor.hpp"

namespace dnncov {

enum class LayerKind { kDense, kConv2d, kMaxPool2d, kAvgPool2d, kFlatten, kActivation };
enum class Activation { kIdentity, kRelu, kTanh, kSigmoid, kSoftmax };

std::string_view to_string(LayerKind kind);
std::string_view to_string(Activation fn);
LayerKind parse_layer_kind(std::string_view name);
Activation parse_activation(std::string_view name);

struct DenseParams {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  friend bool operator==(const DenseParams&, const DenseParams&) = default;
};

struct Conv2dParams {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  friend bool operator==(const Conv2dParams&, const Conv2dParams&) = default;
};

struct PoolParams {
  std::size_t window = 2;
  std::size_t stride = 2;
  friend bool operator==(const PoolParams&, const PoolParams&) = default;
};

struct LayerSpec {
  LayerKind kind = LayerKind::kFlatten;
  Activation activation = Activation::kIdentity;
  std::variant<std::monostate, DenseParams, Conv2dParams, PoolParams> params;

  static LayerSpec dense(std::size_t in_dim, std::size_t out_dim, Activation fn);
  static LayerSpec conv2d(const Conv2dParams& p, Activation fn);
  static LayerSpec max_pool(std::size_t window, std::size_t stride);
  static LayerSpec avg_pool(std::size_t window, std::size_t stride);
  static LayerSpec flatten();
  static LayerSpec activation_layer(Activation fn);

  bool has_weights() const { return kind == LayerKind::kDense || kind == LayerKind::kConv2d; }
  const DenseParams& dense_params() const { return std::get<DenseParams>(params); }
  const Conv2dParams& conv_params() const { return std::get<Conv2dParams>(params); }
  const PoolParams& pool_params() const { return std::get<PoolParams>(params); }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Addresses one coverage neuron: an ordinal into the model's coverage layers
/// plus the neuron's ordinal within that layer.
struct NeuronId {
  std::size_t coverage_layer = 0;
  std::size_t neuron = 0;
  friend auto operator<=>(const NeuronId&, const NeuronId&) = default;
};

/// Immutable feed-forward network. All structural invariants are checked by
/// create(); a constructed model is always internally consistent.
class NetworkModel {
 public:
  /// `weights`/`biases` hold one entry per layer; entries for layers without
  /// parameters must be empty tensors. An empty `coverage_layers` selects the
  /// default set (see default_coverage_layers).
  static NetworkModel create(std::string name, Shape input_shape, std::vector<LayerSpec> layers,
                             std::vector<Tensor> weights, std::vector<Tensor> biases,
                             std::vector<std::size_t> coverage_layers = {});

  /// Output of every weighted layer's activation (a weighted layer with
  /// identity activation followed by an activation layer contributes the
  /// latter), excluding softmax outputs.
  static std::vector<std::size_t> default_coverage_layers(const std::vector<LayerSpec>& layers);

  const std::string& name() const noexcept { return name_; }
  const Shape& input_shape() const noexcept { return input_shape_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  const LayerSpec& layer(std::size_t k) const { return layers_.at(k); }
  const Tensor& weight(std::size_t k) const { return weights_.at(k); }
  const Tensor& bias(std::size_t k) const { return biases_.at(k); }
  const Shape& layer_output_shape(std::size_t k) const { return output_shapes_.at(k); }
  const Shape& output_shape() const { return output_shapes_.back(); }
  std::size_t class_count() const { return element_count(output_shape()); }

  /// Layer indices whose outputs carry coverage neurons, strictly increasing.
  const std::vector<std::size_t>& coverage_layers() const noexcept { return coverage_layers_; }
  /// Neuron count per coverage layer (channels for rank-3 outputs).
  const std::vector<std::size_t>& coverage_layer_sizes() const noexcept { return coverage_sizes_; }
  std::size_t total_neurons() const;

  bool ends_in_softmax() const { return layers_.back().activation == Activation::kSoftmax; }

  /// Throws Error(kInvalidNeuron) when `id` is out of range.
  void check(const NeuronId& id) const;

 private:
  NetworkModel() = default;

  std::string name_;
  Shape input_shape_;
  std::vector<LayerSpec> layers_;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
  std::vector<Shape> output_shapes_;
  std::vector<std::size_t> coverage_layers_;
  std::vector<std::size_t> coverage_sizes_;
};

}  // namespace dnncov

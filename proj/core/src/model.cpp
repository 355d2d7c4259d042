#include "dnncov/model.hpp"

#include <array>
#include <numeric>
#include <utility>

#include "dnncov/error.hpp"

namespace dnncov {

namespace {

constexpr std::array<std::pair<LayerKind, std::string_view>, 6> kKindNames{{
    {LayerKind::kDense, "dense"},
    {LayerKind::kConv2d, "conv2d"},
    {LayerKind::kMaxPool2d, "maxpool2d"},
    {LayerKind::kAvgPool2d, "avgpool2d"},
    {LayerKind::kFlatten, "flatten"},
    {LayerKind::kActivation, "activation"},
}};

constexpr std::array<std::pair<Activation, std::string_view>, 5> kActivationNames{{
    {Activation::kIdentity, "identity"},
    {Activation::kRelu, "relu"},
    {Activation::kTanh, "tanh"},
    {Activation::kSigmoid, "sigmoid"},
    {Activation::kSoftmax, "softmax"},
}};

std::string where(std::size_t k) { return "layer " + std::to_string(k); }

Shape infer_output_shape(const LayerSpec& spec, const Shape& in, std::size_t k) {
  auto mismatch = [&](const std::string& what) {
    return Error(ErrorCode::kShapeMismatch,
                 where(k) + " (" + std::string(to_string(spec.kind)) + "): " + what + ", input shape " +
                     shape_to_string(in));
  };
  switch (spec.kind) {
    case LayerKind::kDense: {
      const auto& p = spec.dense_params();
      if (p.in_dim == 0 || p.out_dim == 0) throw mismatch("dense dims must be positive");
      if (in != Shape{p.in_dim}) throw mismatch("expected [" + std::to_string(p.in_dim) + "]");
      return {p.out_dim};
    }
    case LayerKind::kConv2d: {
      const auto& p = spec.conv_params();
      if (p.in_channels == 0 || p.out_channels == 0 || p.kernel_h == 0 || p.kernel_w == 0 || p.stride == 0) {
        throw mismatch("conv2d params must be positive");
      }
      if (in.size() != 3 || in[0] != p.in_channels) {
        throw mismatch("expected [" + std::to_string(p.in_channels) + ", H, W]");
      }
      const std::size_t h = in[1] + 2 * p.padding;
      const std::size_t w = in[2] + 2 * p.padding;
      if (h < p.kernel_h || w < p.kernel_w) throw mismatch("kernel larger than padded input");
      return {p.out_channels, (h - p.kernel_h) / p.stride + 1, (w - p.kernel_w) / p.stride + 1};
    }
    case LayerKind::kMaxPool2d:
    case LayerKind::kAvgPool2d: {
      const auto& p = spec.pool_params();
      if (p.window == 0 || p.stride == 0) throw mismatch("pool window and stride must be positive");
      if (in.size() != 3) throw mismatch("pooling expects [C, H, W]");
      if (in[1] < p.window || in[2] < p.window) throw mismatch("pool window larger than input");
      return {in[0], (in[1] - p.window) / p.stride + 1, (in[2] - p.window) / p.stride + 1};
    }
    case LayerKind::kFlatten:
      return {element_count(in)};
    case LayerKind::kActivation:
      return in;
  }
  throw Error(ErrorCode::kUnsupported, where(k) + ": unknown layer kind");
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::string_view to_string(Activation fn) {
  for (const auto& [a, name] : kActivationNames) {
    if (a == fn) return name;
  }
  return "unknown";
}

LayerKind parse_layer_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw Error(ErrorCode::kUnsupported, "unsupported layer kind '" + std::string(name) + "'");
}

Activation parse_activation(std::string_view name) {
  for (const auto& [a, n] : kActivationNames) {
    if (n == name) return a;
  }
  throw Error(ErrorCode::kUnsupported, "unsupported activation '" + std::string(name) + "'");
}

LayerSpec LayerSpec::dense(std::size_t in_dim, std::size_t out_dim, Activation fn) {
  return {LayerKind::kDense, fn, DenseParams{in_dim, out_dim}};
}

LayerSpec LayerSpec::conv2d(const Conv2dParams& p, Activation fn) { return {LayerKind::kConv2d, fn, p}; }

LayerSpec LayerSpec::max_pool(std::size_t window, std::size_t stride) {
  return {LayerKind::kMaxPool2d, Activation::kIdentity, PoolParams{window, stride}};
}

LayerSpec LayerSpec::avg_pool(std::size_t window, std::size_t stride) {
  return {LayerKind::kAvgPool2d, Activation::kIdentity, PoolParams{window, stride}};
}

LayerSpec LayerSpec::flatten() { return {LayerKind::kFlatten, Activation::kIdentity, std::monostate{}}; }

LayerSpec LayerSpec::activation_layer(Activation fn) {
  return {LayerKind::kActivation, fn, std::monostate{}};
}

std::vector<std::size_t> NetworkModel::default_coverage_layers(const std::vector<LayerSpec>& layers) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (!layers[k].has_weights()) continue;
    std::size_t index = k;
    Activation fn = layers[k].activation;
    if (fn == Activation::kIdentity && k + 1 < layers.size() && layers[k + 1].kind == LayerKind::kActivation) {
      index = k + 1;
      fn = layers[k + 1].activation;
    }
    if (fn != Activation::kSoftmax) out.push_back(index);
  }
  return out;
}

NetworkModel NetworkModel::create(std::string name, Shape input_shape, std::vector<LayerSpec> layers,
                                  std::vector<Tensor> weights, std::vector<Tensor> biases,
                                  std::vector<std::size_t> coverage_layers) {
  if (layers.empty()) throw Error(ErrorCode::kInput, "model '" + name + "' has no layers");
  if (weights.size() != layers.size() || biases.size() != layers.size()) {
    throw Error(ErrorCode::kInput, "model '" + name + "': weights/biases must have one entry per layer");
  }
  if (input_shape.empty() || element_count(input_shape) == 0) {
    throw Error(ErrorCode::kShapeMismatch, "model input shape must be non-empty with positive dims");
  }

  NetworkModel m;
  m.name_ = std::move(name);
  m.input_shape_ = std::move(input_shape);

  Shape current = m.input_shape_;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const LayerSpec& spec = layers[k];
    const bool params_ok = [&] {
      switch (spec.kind) {
        case LayerKind::kDense: return std::holds_alternative<DenseParams>(spec.params);
        case LayerKind::kConv2d: return std::holds_alternative<Conv2dParams>(spec.params);
        case LayerKind::kMaxPool2d:
        case LayerKind::kAvgPool2d: return std::holds_alternative<PoolParams>(spec.params);
        default: return std::holds_alternative<std::monostate>(spec.params);
      }
    }();
    if (!params_ok) throw Error(ErrorCode::kInput, where(k) + ": parameters do not match layer kind");

    if (!spec.has_weights() && spec.kind != LayerKind::kActivation && spec.activation != Activation::kIdentity) {
      throw Error(ErrorCode::kInput, where(k) + ": " + std::string(to_string(spec.kind)) +
                                         " layers take no activation");
    }
    if (spec.activation == Activation::kSoftmax && k + 1 != layers.size()) {
      throw Error(ErrorCode::kInput, where(k) + ": softmax is only permitted as the final activation");
    }

    Shape out = infer_output_shape(spec, current, k);
    if (spec.activation == Activation::kSoftmax && out.size() != 1) {
      throw Error(ErrorCode::kShapeMismatch, where(k) + ": softmax requires a rank-1 output");
    }

    if (spec.has_weights()) {
      Shape wshape;
      Shape bshape;
      if (spec.kind == LayerKind::kDense) {
        wshape = {spec.dense_params().out_dim, spec.dense_params().in_dim};
        bshape = {spec.dense_params().out_dim};
      } else {
        const auto& p = spec.conv_params();
        wshape = {p.out_channels, p.in_channels, p.kernel_h, p.kernel_w};
        bshape = {p.out_channels};
      }
      if (weights[k].shape() != wshape) {
        throw Error(ErrorCode::kShapeMismatch, where(k) + " weight: expected " + shape_to_string(wshape) +
                                                   ", got " + shape_to_string(weights[k].shape()));
      }
      if (biases[k].shape() != bshape) {
        throw Error(ErrorCode::kShapeMismatch, where(k) + " bias: expected " + shape_to_string(bshape) +
                                                   ", got " + shape_to_string(biases[k].shape()));
      }
    } else if (weights[k].size() != 0 || biases[k].size() != 0) {
      throw Error(ErrorCode::kShapeMismatch, where(k) + ": layer kind carries no weights");
    }

    m.output_shapes_.push_back(out);
    current = std::move(out);
  }

  if (coverage_layers.empty()) coverage_layers = default_coverage_layers(layers);
  if (coverage_layers.empty()) {
    throw Error(ErrorCode::kInput, "model '" + m.name_ + "' has no eligible coverage layers");
  }
  for (std::size_t i = 0; i < coverage_layers.size(); ++i) {
    const std::size_t k = coverage_layers[i];
    if (k >= layers.size()) {
      throw Error(ErrorCode::kInput, "coverage layer index " + std::to_string(k) + " out of range");
    }
    if (i > 0 && coverage_layers[i - 1] >= k) {
      throw Error(ErrorCode::kInput, "coverage_layers must be strictly increasing");
    }
    const Shape& s = m.output_shapes_[k];
    if (s.size() == 1) {
      m.coverage_sizes_.push_back(s[0]);
    } else if (s.size() == 3) {
      m.coverage_sizes_.push_back(s[0]);
    } else {
      throw Error(ErrorCode::kShapeMismatch, "coverage " + where(k) + " must produce a rank-1 or rank-3 output");
    }
  }

  m.layers_ = std::move(layers);
  m.weights_ = std::move(weights);
  m.biases_ = std::move(biases);
  m.coverage_layers_ = std::move(coverage_layers);
  return m;
}

std::size_t NetworkModel::total_neurons() const {
  return std::accumulate(coverage_sizes_.begin(), coverage_sizes_.end(), std::size_t{0});
}

void NetworkModel::check(const NeuronId& id) const {
  if (id.coverage_layer >= coverage_sizes_.size()) {
    throw Error(ErrorCode::kInvalidNeuron, "model '" + name_ + "': coverage layer " +
                                               std::to_string(id.coverage_layer) + " out of range (" +
                                               std::to_string(coverage_sizes_.size()) + " layers)");
  }
  if (id.neuron >= coverage_sizes_[id.coverage_layer]) {
    throw Error(ErrorCode::kInvalidNeuron, "model '" + name_ + "': neuron " + std::to_string(id.neuron) +
                                               " out of range in coverage layer " +
                                               std::to_string(id.coverage_layer));
  }
}

}  // namespace dnncov

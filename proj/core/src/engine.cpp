#include "dnncov/engine.hpp"

#include <algorithm>
#include <cmath>

#include "dnncov/error.hpp"

namespace dnncov {

namespace {

struct LayerState {
  std::vector<double> pre;  // before activation; empty when activation is identity
  std::vector<double> out;
};

struct Tape {
  std::vector<LayerState> layers;
};

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void activate(Activation fn, std::vector<double>& v) {
  switch (fn) {
    case Activation::kIdentity: return;
    case Activation::kRelu:
      for (double& x : v) x = x > 0.0 ? x : 0.0;
      return;
    case Activation::kTanh:
      for (double& x : v) x = std::tanh(x);
      return;
    case Activation::kSigmoid:
      for (double& x : v) x = sigmoid(x);
      return;
    case Activation::kSoftmax: {
      const double top = *std::max_element(v.begin(), v.end());
      double sum = 0.0;
      for (double& x : v) {
        x = std::exp(x - top);
        sum += x;
      }
      for (double& x : v) x /= sum;
      return;
    }
  }
}

// Turns dL/d(out) into dL/d(pre) in place.
void activation_backward(Activation fn, const LayerState& st, std::vector<double>& g) {
  switch (fn) {
    case Activation::kIdentity: return;
    case Activation::kRelu:
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(st.pre[i] > 0.0)) g[i] = 0.0;
      }
      return;
    case Activation::kTanh:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - st.out[i] * st.out[i];
      return;
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= st.out[i] * (1.0 - st.out[i]);
      return;
    case Activation::kSoftmax: {
      double dot = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * st.out[i];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = st.out[i] * (g[i] - dot);
      return;
    }
  }
}

std::vector<double> dense_forward(const DenseParams& p, const Tensor& w, const Tensor& b,
                                  const std::vector<double>& in) {
  std::vector<double> out(p.out_dim);
  const auto wd = w.data();
  for (std::size_t i = 0; i < p.out_dim; ++i) {
    double acc = b[i];
    const double* row = wd.data() + i * p.in_dim;
    for (std::size_t j = 0; j < p.in_dim; ++j) acc += row[j] * in[j];
    out[i] = acc;
  }
  return out;
}

std::vector<double> dense_backward(const DenseParams& p, const Tensor& w, const std::vector<double>& g) {
  std::vector<double> gin(p.in_dim, 0.0);
  const auto wd = w.data();
  for (std::size_t i = 0; i < p.out_dim; ++i) {
    if (g[i] == 0.0) continue;
    const double* row = wd.data() + i * p.in_dim;
    for (std::size_t j = 0; j < p.in_dim; ++j) gin[j] += row[j] * g[i];
  }
  return gin;
}

std::vector<double> conv_forward(const Conv2dParams& p, const Tensor& w, const Tensor& b, const Shape& in_shape,
                                 const Shape& out_shape, const std::vector<double>& in) {
  const std::size_t ih = in_shape[1], iw = in_shape[2];
  const std::size_t oh = out_shape[1], ow = out_shape[2];
  const auto wd = w.data();
  std::vector<double> out(p.out_channels * oh * ow);
  for (std::size_t oc = 0; oc < p.out_channels; ++oc) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double acc = b[oc];
        for (std::size_t ic = 0; ic < p.in_channels; ++ic) {
          const double* kern = wd.data() + ((oc * p.in_channels + ic) * p.kernel_h) * p.kernel_w;
          const double* plane = in.data() + ic * ih * iw;
          for (std::size_t ky = 0; ky < p.kernel_h; ++ky) {
            const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * p.stride + ky) -
                                     static_cast<std::ptrdiff_t>(p.padding);
            if (y < 0 || y >= static_cast<std::ptrdiff_t>(ih)) continue;
            for (std::size_t kx = 0; kx < p.kernel_w; ++kx) {
              const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox * p.stride + kx) -
                                       static_cast<std::ptrdiff_t>(p.padding);
              if (x < 0 || x >= static_cast<std::ptrdiff_t>(iw)) continue;
              acc += kern[ky * p.kernel_w + kx] * plane[static_cast<std::size_t>(y) * iw + static_cast<std::size_t>(x)];
            }
          }
        }
        out[(oc * oh + oy) * ow + ox] = acc;
      }
    }
  }
  return out;
}

std::vector<double> conv_backward(const Conv2dParams& p, const Tensor& w, const Shape& in_shape,
                                  const Shape& out_shape, const std::vector<double>& g) {
  const std::size_t ih = in_shape[1], iw = in_shape[2];
  const std::size_t oh = out_shape[1], ow = out_shape[2];
  const auto wd = w.data();
  std::vector<double> gin(p.in_channels * ih * iw, 0.0);
  for (std::size_t oc = 0; oc < p.out_channels; ++oc) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const double go = g[(oc * oh + oy) * ow + ox];
        if (go == 0.0) continue;
        for (std::size_t ic = 0; ic < p.in_channels; ++ic) {
          const double* kern = wd.data() + ((oc * p.in_channels + ic) * p.kernel_h) * p.kernel_w;
          double* plane = gin.data() + ic * ih * iw;
          for (std::size_t ky = 0; ky < p.kernel_h; ++ky) {
            const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * p.stride + ky) -
                                     static_cast<std::ptrdiff_t>(p.padding);
            if (y < 0 || y >= static_cast<std::ptrdiff_t>(ih)) continue;
            for (std::size_t kx = 0; kx < p.kernel_w; ++kx) {
              const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox * p.stride + kx) -
                                       static_cast<std::ptrdiff_t>(p.padding);
              if (x < 0 || x >= static_cast<std::ptrdiff_t>(iw)) continue;
              plane[static_cast<std::size_t>(y) * iw + static_cast<std::size_t>(x)] += kern[ky * p.kernel_w + kx] * go;
            }
          }
        }
      }
    }
  }
  return gin;
}

// Flat input index selected by max pooling for each output cell.
std::size_t max_source(const PoolParams& p, const Shape& in_shape, const std::vector<double>& in, std::size_t c,
                       std::size_t oy, std::size_t ox) {
  const std::size_t ih = in_shape[1], iw = in_shape[2];
  std::size_t best = (c * ih + oy * p.stride) * iw + ox * p.stride;
  for (std::size_t ky = 0; ky < p.window; ++ky) {
    for (std::size_t kx = 0; kx < p.window; ++kx) {
      const std::size_t idx = (c * ih + oy * p.stride + ky) * iw + ox * p.stride + kx;
      if (in[idx] > in[best]) best = idx;
    }
  }
  return best;
}

std::vector<double> pool_forward(LayerKind kind, const PoolParams& p, const Shape& in_shape, const Shape& out_shape,
                                 const std::vector<double>& in) {
  const std::size_t ih = in_shape[1], iw = in_shape[2];
  const std::size_t oh = out_shape[1], ow = out_shape[2];
  const double area = static_cast<double>(p.window * p.window);
  std::vector<double> out(out_shape[0] * oh * ow);
  for (std::size_t c = 0; c < out_shape[0]; ++c) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double v;
        if (kind == LayerKind::kMaxPool2d) {
          v = in[max_source(p, in_shape, in, c, oy, ox)];
        } else {
          double acc = 0.0;
          for (std::size_t ky = 0; ky < p.window; ++ky) {
            for (std::size_t kx = 0; kx < p.window; ++kx) {
              acc += in[(c * ih + oy * p.stride + ky) * iw + ox * p.stride + kx];
            }
          }
          v = acc / area;
        }
        out[(c * oh + oy) * ow + ox] = v;
      }
    }
  }
  return out;
}

std::vector<double> pool_backward(LayerKind kind, const PoolParams& p, const Shape& in_shape, const Shape& out_shape,
                                  const std::vector<double>& in, const std::vector<double>& g) {
  const std::size_t ih = in_shape[1], iw = in_shape[2];
  const std::size_t oh = out_shape[1], ow = out_shape[2];
  const double area = static_cast<double>(p.window * p.window);
  std::vector<double> gin(in.size(), 0.0);
  for (std::size_t c = 0; c < out_shape[0]; ++c) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const double go = g[(c * oh + oy) * ow + ox];
        if (go == 0.0) continue;
        if (kind == LayerKind::kMaxPool2d) {
          gin[max_source(p, in_shape, in, c, oy, ox)] += go;
        } else {
          for (std::size_t ky = 0; ky < p.window; ++ky) {
            for (std::size_t kx = 0; kx < p.window; ++kx) {
              gin[(c * ih + oy * p.stride + ky) * iw + ox * p.stride + kx] += go / area;
            }
          }
        }
      }
    }
  }
  return gin;
}

void check_input(const NetworkModel& model, const Tensor& input) {
  if (input.shape() != model.input_shape()) {
    throw Error(ErrorCode::kShapeMismatch, "model '" + model.name() + "' expects input " +
                                               shape_to_string(model.input_shape()) + ", got " +
                                               shape_to_string(input.shape()));
  }
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (input[i] < 0.0 || input[i] > 1.0) {
      throw Error(ErrorCode::kInput, "input value " + std::to_string(input[i]) + " at flat index " +
                                         std::to_string(i) + " outside [0, 1]");
    }
  }
}

const Shape& input_shape_of(const NetworkModel& model, std::size_t k) {
  return k == 0 ? model.input_shape() : model.layer_output_shape(k - 1);
}

Tape run(const NetworkModel& model, const Tensor& input) {
  check_input(model, input);
  Tape tape;
  tape.layers.reserve(model.layer_count());
  const std::vector<double>* prev = &input.values();
  for (std::size_t k = 0; k < model.layer_count(); ++k) {
    const LayerSpec& spec = model.layer(k);
    const Shape& in_shape = input_shape_of(model, k);
    const Shape& out_shape = model.layer_output_shape(k);
    std::vector<double> z;
    switch (spec.kind) {
      case LayerKind::kDense:
        z = dense_forward(spec.dense_params(), model.weight(k), model.bias(k), *prev);
        break;
      case LayerKind::kConv2d:
        z = conv_forward(spec.conv_params(), model.weight(k), model.bias(k), in_shape, out_shape, *prev);
        break;
      case LayerKind::kMaxPool2d:
      case LayerKind::kAvgPool2d:
        z = pool_forward(spec.kind, spec.pool_params(), in_shape, out_shape, *prev);
        break;
      case LayerKind::kFlatten:
      case LayerKind::kActivation:
        z = *prev;
        break;
    }
    LayerState st;
    if (spec.activation != Activation::kIdentity) {
      st.pre = z;
      activate(spec.activation, z);
    }
    st.out = std::move(z);
    for (double v : st.out) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kNumeric, "model '" + model.name() + "': non-finite value in layer " +
                                             std::to_string(k) + " (" + std::string(to_string(spec.kind)) + ")");
      }
    }
    tape.layers.push_back(std::move(st));
    prev = &tape.layers.back().out;
  }
  return tape;
}

ActivationTrace make_trace(const NetworkModel& model, const Tape& tape) {
  ActivationTrace trace;
  trace.model_name = model.name();
  const auto& cov = model.coverage_layers();
  trace.values.reserve(cov.size());
  for (std::size_t k : cov) {
    const Shape& s = model.layer_output_shape(k);
    const std::vector<double>& out = tape.layers[k].out;
    if (s.size() == 1) {
      trace.values.push_back(out);
    } else {
      const std::size_t plane = s[1] * s[2];
      std::vector<double> means(s[0]);
      for (std::size_t c = 0; c < s[0]; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += out[c * plane + i];
        means[c] = acc / static_cast<double>(plane);
      }
      trace.values.push_back(std::move(means));
    }
  }
  trace.logits = tape.layers.back().out;
  trace.predicted_label = argmax(trace.logits);
  return trace;
}

std::vector<double> softmax_of(std::vector<double> v) {
  activate(Activation::kSoftmax, v);
  return v;
}

bool model_used(const ObjectiveSpec& spec, std::size_t m) {
  for (const auto& t : spec.terms) {
    if (t.model == m && t.weight != 0.0) return true;
  }
  return spec.differential && spec.differential->coefficients[m] != 0.0;
}

}  // namespace

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

ActivationTrace forward(const NetworkModel& model, const Tensor& input) {
  return make_trace(model, run(model, input));
}

std::vector<Tensor> layer_outputs(const NetworkModel& model, const Tensor& input) {
  Tape tape = run(model, input);
  std::vector<Tensor> out;
  out.reserve(tape.layers.size());
  for (std::size_t k = 0; k < tape.layers.size(); ++k) {
    out.emplace_back(model.layer_output_shape(k), std::move(tape.layers[k].out));
  }
  return out;
}

std::vector<double> class_probabilities(const NetworkModel& model, const ActivationTrace& trace) {
  if (model.ends_in_softmax()) return trace.logits;
  return softmax_of(trace.logits);
}

void validate(std::span<const NetworkModel> models, const ObjectiveSpec& spec) {
  if (!std::isfinite(spec.coverage_weight)) throw Error(ErrorCode::kNumeric, "coverage weight is not finite");
  for (const auto& t : spec.terms) {
    if (t.model >= models.size()) {
      throw Error(ErrorCode::kInvalidNeuron, "objective term references model " + std::to_string(t.model) +
                                                 " but only " + std::to_string(models.size()) + " given");
    }
    models[t.model].check(t.neuron);
    if (t.sign != 1 && t.sign != -1) throw Error(ErrorCode::kInput, "objective term sign must be +1 or -1");
    if (!std::isfinite(t.weight)) throw Error(ErrorCode::kNumeric, "objective term weight is not finite");
  }
  if (spec.differential) {
    const auto& d = *spec.differential;
    if (d.coefficients.size() != models.size()) {
      throw Error(ErrorCode::kInput, "differential term needs one coefficient per model");
    }
    for (std::size_t m = 0; m < models.size(); ++m) {
      if (!std::isfinite(d.coefficients[m])) throw Error(ErrorCode::kNumeric, "differential coefficient not finite");
      if (d.coefficients[m] != 0.0 && d.label >= models[m].class_count()) {
        throw Error(ErrorCode::kInput, "differential label " + std::to_string(d.label) + " out of range for model '" +
                                           models[m].name() + "'");
      }
    }
  }
}

double objective_value(std::span<const NetworkModel> models, const Tensor& input, const ObjectiveSpec& spec) {
  validate(models, spec);
  std::vector<std::optional<ActivationTrace>> traces(models.size());
  for (std::size_t m = 0; m < models.size(); ++m) {
    if (model_used(spec, m)) traces[m] = forward(models[m], input);
  }
  double coverage = 0.0;
  for (const auto& t : spec.terms) {
    if (t.weight == 0.0) continue;
    coverage += t.sign * t.weight * traces[t.model]->at(t.neuron);
  }
  double value = spec.coverage_weight * coverage;
  if (spec.differential) {
    for (std::size_t m = 0; m < models.size(); ++m) {
      const double c = spec.differential->coefficients[m];
      if (c == 0.0) continue;
      value += c * class_probabilities(models[m], *traces[m])[spec.differential->label];
    }
  }
  return value;
}

Tensor input_gradient(std::span<const NetworkModel> models, const Tensor& input, const ObjectiveSpec& spec) {
  validate(models, spec);
  std::vector<double> total(input.size(), 0.0);

  for (std::size_t m = 0; m < models.size(); ++m) {
    if (!model_used(spec, m)) continue;
    const NetworkModel& model = models[m];
    const Tape tape = run(model, input);
    const std::size_t depth = model.layer_count();

    std::vector<std::vector<double>> seeds(depth);
    auto seed = [&](std::size_t k) -> std::vector<double>& {
      if (seeds[k].empty()) seeds[k].assign(tape.layers[k].out.size(), 0.0);
      return seeds[k];
    };

    for (const auto& t : spec.terms) {
      if (t.model != m || t.weight == 0.0) continue;
      const double c = spec.coverage_weight * t.sign * t.weight;
      const std::size_t k = model.coverage_layers()[t.neuron.coverage_layer];
      const Shape& s = model.layer_output_shape(k);
      auto& g = seed(k);
      if (s.size() == 1) {
        g[t.neuron.neuron] += c;
      } else {
        const std::size_t plane = s[1] * s[2];
        const double share = c / static_cast<double>(plane);
        for (std::size_t i = 0; i < plane; ++i) g[t.neuron.neuron * plane + i] += share;
      }
    }

    if (spec.differential && spec.differential->coefficients[m] != 0.0) {
      const double c = spec.differential->coefficients[m];
      const std::size_t label = spec.differential->label;
      auto& g = seed(depth - 1);
      if (model.ends_in_softmax()) {
        g[label] += c;
      } else {
        const std::vector<double> p = softmax_of(tape.layers.back().out);
        for (std::size_t i = 0; i < p.size(); ++i) {
          g[i] += c * p[label] * ((i == label ? 1.0 : 0.0) - p[i]);
        }
      }
    }

    std::vector<double> carried;  // dL/d(output of layer k); empty means zero
    for (std::size_t k = depth; k-- > 0;) {
      std::vector<double> g = std::move(carried);
      if (!seeds[k].empty()) {
        if (g.empty()) {
          g = std::move(seeds[k]);
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += seeds[k][i];
        }
      }
      carried.clear();
      if (g.empty()) continue;

      const LayerSpec& spec_k = model.layer(k);
      activation_backward(spec_k.activation, tape.layers[k], g);
      const Shape& in_shape = input_shape_of(model, k);
      const Shape& out_shape = model.layer_output_shape(k);
      const std::vector<double>& in = k == 0 ? input.values() : tape.layers[k - 1].out;
      switch (spec_k.kind) {
        case LayerKind::kDense:
          carried = dense_backward(spec_k.dense_params(), model.weight(k), g);
          break;
        case LayerKind::kConv2d:
          carried = conv_backward(spec_k.conv_params(), model.weight(k), in_shape, out_shape, g);
          break;
        case LayerKind::kMaxPool2d:
        case LayerKind::kAvgPool2d:
          carried = pool_backward(spec_k.kind, spec_k.pool_params(), in_shape, out_shape, in, g);
          break;
        case LayerKind::kFlatten:
        case LayerKind::kActivation:
          carried = std::move(g);
          break;
      }
    }
    if (!carried.empty()) {
      for (std::size_t i = 0; i < total.size(); ++i) total[i] += carried[i];
    }
  }
  return Tensor(input.shape(), std::move(total));
}

}  // namespace dnncov

#include "oracles.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include <unistd.h>

namespace dnncov::testing {
namespace {

double apply_scalar(Activation fn, double z) {
  switch (fn) {
    case Activation::kRelu:
      return z > 0.0 ? z : 0.0;
    case Activation::kTanh:
      return std::tanh(z);
    case Activation::kSigmoid:
      return 1.0 / (1.0 + std::exp(-z));
    default:
      return z;
  }
}

std::vector<double> activate(Activation fn, const std::vector<double>& z) {
  std::vector<double> out(z.size());
  if (fn == Activation::kSoftmax) {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : z) m = std::max(m, v);
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += (out[i] = std::exp(z[i] - m));
    for (double& v : out) v /= s;
    return out;
  }
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = apply_scalar(fn, z[i]);
  return out;
}

struct Walk {
  std::vector<NaiveLayer> layers;
  std::vector<std::size_t> maxpool_winners;
};

Walk walk(const NetworkModel& model, const std::vector<double>& input) {
  Walk w;
  std::vector<double> prev = input;
  Shape prev_shape = model.input_shape();
  for (std::size_t k = 0; k < model.layer_count(); ++k) {
    const LayerSpec& spec = model.layer(k);
    const Shape& out_shape = model.layer_output_shape(k);
    std::vector<double> pre(element_count(out_shape), 0.0);
    switch (spec.kind) {
      case LayerKind::kDense: {
        const auto& W = model.weight(k).values();
        const auto& b = model.bias(k).values();
        const std::size_t in = spec.dense_params().in_dim;
        for (std::size_t o = 0; o < pre.size(); ++o) {
          double acc = b[o];
          for (std::size_t i = 0; i < in; ++i) acc += W[o * in + i] * prev[i];
          pre[o] = acc;
        }
        break;
      }
      case LayerKind::kConv2d: {
        const auto& p = spec.conv_params();
        const auto& W = model.weight(k).values();
        const auto& b = model.bias(k).values();
        const std::size_t H = prev_shape[1], Wd = prev_shape[2];
        const std::size_t OH = out_shape[1], OW = out_shape[2];
        auto x_at = [&](std::size_t c, long y, long x) -> double {
          if (y < 0 || x < 0 || y >= static_cast<long>(H) || x >= static_cast<long>(Wd)) return 0.0;
          return prev[(c * H + static_cast<std::size_t>(y)) * Wd + static_cast<std::size_t>(x)];
        };
        for (std::size_t oc = 0; oc < p.out_channels; ++oc)
          for (std::size_t oy = 0; oy < OH; ++oy)
            for (std::size_t ox = 0; ox < OW; ++ox) {
              double acc = b[oc];
              for (std::size_t ic = 0; ic < p.in_channels; ++ic)
                for (std::size_t ky = 0; ky < p.kernel_h; ++ky)
                  for (std::size_t kx = 0; kx < p.kernel_w; ++kx) {
                    const long y = static_cast<long>(oy * p.stride + ky) - static_cast<long>(p.padding);
                    const long x = static_cast<long>(ox * p.stride + kx) - static_cast<long>(p.padding);
                    acc += W[((oc * p.in_channels + ic) * p.kernel_h + ky) * p.kernel_w + kx] * x_at(ic, y, x);
                  }
              pre[(oc * OH + oy) * OW + ox] = acc;
            }
        break;
      }
      case LayerKind::kMaxPool2d:
      case LayerKind::kAvgPool2d: {
        const auto& p = spec.pool_params();
        const std::size_t H = prev_shape[1], Wd = prev_shape[2];
        const std::size_t OH = out_shape[1], OW = out_shape[2];
        for (std::size_t c = 0; c < out_shape[0]; ++c)
          for (std::size_t oy = 0; oy < OH; ++oy)
            for (std::size_t ox = 0; ox < OW; ++ox) {
              double best = -std::numeric_limits<double>::infinity();
              std::size_t arg = 0;
              double sum = 0.0;
              for (std::size_t dy = 0; dy < p.window; ++dy)
                for (std::size_t dx = 0; dx < p.window; ++dx) {
                  const std::size_t src = (c * H + oy * p.stride + dy) * Wd + ox * p.stride + dx;
                  sum += prev[src];
                  if (prev[src] > best) {
                    best = prev[src];
                    arg = src;
                  }
                }
              const std::size_t dst = (c * OH + oy) * OW + ox;
              if (spec.kind == LayerKind::kMaxPool2d) {
                pre[dst] = best;
                w.maxpool_winners.push_back(arg);
              } else {
                pre[dst] = sum / static_cast<double>(p.window * p.window);
              }
            }
        break;
      }
      case LayerKind::kFlatten:
      case LayerKind::kActivation:
        pre = prev;
        break;
    }
    std::vector<double> out = activate(spec.activation, pre);
    w.layers.push_back(NaiveLayer{pre, out});
    prev = out;
    prev_shape = out_shape;
  }
  return w;
}

}  // namespace

std::vector<NaiveLayer> naive_forward(const NetworkModel& model, const std::vector<double>& input) {
  return walk(model, input).layers;
}

std::vector<std::vector<double>> naive_coverage_values(const NetworkModel& model, const std::vector<double>& input) {
  auto layers = naive_forward(model, input);
  std::vector<std::vector<double>> result;
  for (std::size_t k : model.coverage_layers()) {
    const Shape& s = model.layer_output_shape(k);
    const auto& out = layers[k].out;
    if (s.size() == 1) {
      result.push_back(out);
      continue;
    }
    const std::size_t plane = s[1] * s[2];
    std::vector<double> means(s[0], 0.0);
    for (std::size_t c = 0; c < s[0]; ++c) {
      double acc = 0.0;
      for (std::size_t p = 0; p < plane; ++p) acc += out[c * plane + p];
      means[c] = acc / static_cast<double>(plane);
    }
    result.push_back(means);
  }
  return result;
}

std::vector<std::size_t> kink_signature(const NetworkModel& model, const std::vector<double>& input) {
  Walk w = walk(model, input);
  std::vector<std::size_t> sig = w.maxpool_winners;
  for (std::size_t k = 0; k < model.layer_count(); ++k) {
    if (model.layer(k).activation != Activation::kRelu) continue;
    for (double z : w.layers[k].pre) sig.push_back(z > 0.0 ? 1 : 0);
  }
  return sig;
}

double min_relu_margin(const NetworkModel& model, const std::vector<double>& input) {
  auto layers = naive_forward(model, input);
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < model.layer_count(); ++k) {
    if (model.layer(k).activation != Activation::kRelu) continue;
    for (double z : layers[k].pre) m = std::min(m, std::abs(z));
  }
  return m;
}

std::vector<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>> brute_force_triplets(
    const std::vector<std::size_t>& sizes) {
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>> out;
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k)
    for (std::size_t i = 0; i < sizes[k]; ++i)
      for (std::size_t j = 0; j < sizes[k]; ++j) {
        if (j <= i) continue;
        for (std::size_t q = 0; q < sizes[k + 1]; ++q) out.emplace_back(k, i, j, q);
      }
  return out;
}

std::size_t naive_pair_cells(const ObservedTuples& tuples) {
  std::set<std::pair<bool, bool>> ij, iq, jq;
  for (const auto& [a, b, c] : tuples) {
    ij.insert({a, b});
    iq.insert({a, c});
    jq.insert({b, c});
  }
  return ij.size() + iq.size() + jq.size();
}

std::uint8_t tuples_to_mask(const ObservedTuples& tuples) {
  std::uint8_t m = 0;
  for (const auto& [a, b, c] : tuples) m |= static_cast<std::uint8_t>(1u << ((a ? 4 : 0) + (b ? 2 : 0) + (c ? 1 : 0)));
  return m;
}

NaiveCoverage naive_coverage(const std::vector<std::size_t>& sizes,
                             const std::vector<std::vector<std::vector<double>>>& traces, double threshold) {
  NaiveCoverage nc;
  const auto all = brute_force_triplets(sizes);
  nc.observed.resize(all.size());
  for (const auto& trace : traces)
    for (std::size_t t = 0; t < all.size(); ++t) {
      const auto [k, i, j, q] = all[t];
      nc.observed[t].insert({trace[k][i] > threshold, trace[k][j] > threshold, trace[k + 1][q] > threshold});
    }
  if (all.empty()) return nc;
  std::size_t full = 0, cells = 0, configs = 0;
  for (const auto& obs : nc.observed) {
    const std::size_t pc = naive_pair_cells(obs);
    cells += pc;
    configs += obs.size();
    if (pc == 12) ++full;
  }
  const double n = static_cast<double>(all.size());
  nc.triplet_coverage = static_cast<double>(full) / n;
  nc.pair_cell_coverage = static_cast<double>(cells) / (12.0 * n);
  nc.full_config_coverage = static_cast<double>(configs) / (8.0 * n);
  return nc;
}

NetworkModel random_dense_net(std::mt19937_64& rng, const RandomNetOptions& opts, std::string name) {
  std::uniform_int_distribution<std::size_t> depth_d(1, opts.max_hidden_layers);
  std::uniform_int_distribution<std::size_t> width_d(2, opts.max_width);
  std::uniform_int_distribution<std::size_t> in_d(2, opts.max_input);
  std::uniform_int_distribution<std::size_t> act_d(0, opts.activations.size() - 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t depth = depth_d(rng);
  const std::size_t input_dim = in_d(rng);
  std::size_t in = input_dim;
  std::vector<LayerSpec> layers;
  std::vector<Tensor> weights, biases;
  for (std::size_t l = 0; l <= depth; ++l) {
    const bool last = l == depth;
    const std::size_t out = last ? std::uniform_int_distribution<std::size_t>(2, 10)(rng) : width_d(rng);
    Activation fn = opts.activations[act_d(rng)];
    if (last && opts.allow_softmax_head && rng() % 2 == 0) fn = Activation::kSoftmax;
    layers.push_back(LayerSpec::dense(in, out, fn));
    const double scale = 1.5 / std::sqrt(static_cast<double>(in));
    std::vector<double> w(out * in), b(out);
    for (double& v : w) v = normal(rng) * scale;
    for (double& v : b) v = normal(rng) * 0.3;
    weights.emplace_back(Shape{out, in}, std::move(w));
    biases.emplace_back(Shape{out}, std::move(b));
    in = out;
  }
  return NetworkModel::create(std::move(name), Shape{input_dim}, std::move(layers),
                              std::move(weights), std::move(biases));
}

NetworkModel random_conv_net(std::mt19937_64& rng, std::string name) {
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](Shape s, double scale) {
    std::vector<double> v(element_count(s));
    for (double& x : v) x = normal(rng) * scale;
    return Tensor(std::move(s), std::move(v));
  };
  const std::size_t c1 = 2 + rng() % 3;
  const std::size_t c2 = 2 + rng() % 3;
  const std::size_t classes = 3 + rng() % 3;
  const Activation a1 = (rng() % 2) ? Activation::kRelu : Activation::kTanh;
  const Activation a2 = (rng() % 2) ? Activation::kRelu : Activation::kSigmoid;
  const bool maxpool = rng() % 2 == 0;
  std::vector<LayerSpec> layers = {
      LayerSpec::conv2d({1, c1, 3, 3, 1, 1}, a1),                               // 1x8x8 -> c1x8x8
      maxpool ? LayerSpec::max_pool(2, 2) : LayerSpec::avg_pool(2, 2),          // c1x4x4
      LayerSpec::conv2d({c1, c2, 3, 3, 1, 0}, a2),                              // c2x2x2
      LayerSpec::flatten(),
      LayerSpec::dense(c2 * 4, classes, (rng() % 2) ? Activation::kSoftmax : Activation::kIdentity),
  };
  std::vector<Tensor> weights = {fill({c1, 1, 3, 3}, 0.6), Tensor(), fill({c2, c1, 3, 3}, 0.4), Tensor(),
                                 fill({classes, c2 * 4}, 0.7)};
  std::vector<Tensor> biases = {fill({c1}, 0.2), Tensor(), fill({c2}, 0.2), Tensor(), fill({classes}, 0.2)};
  return NetworkModel::create(std::move(name), Shape{1, 8, 8}, std::move(layers), std::move(weights),
                              std::move(biases));
}

NetworkModel small_classifier(std::uint64_t seed, std::string name, const Shape& input_shape, std::size_t classes) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  // Weights are exact float32 values so model files round-trip bit-exactly.
  auto fill = [&](Shape s, double scale) {
    std::vector<double> v(element_count(s));
    for (double& x : v) x = static_cast<double>(static_cast<float>(normal(rng) * scale));
    return Tensor(std::move(s), std::move(v));
  };
  const std::size_t in = element_count(input_shape);
  std::vector<LayerSpec> layers = {
      LayerSpec::flatten(),
      LayerSpec::dense(in, 8, Activation::kRelu),
      LayerSpec::dense(8, 6, Activation::kTanh),
      LayerSpec::dense(6, classes, Activation::kSoftmax),
  };
  std::vector<Tensor> weights = {Tensor(), fill({8, in}, 0.8), fill({6, 8}, 0.8), fill({classes, 6}, 1.0)};
  std::vector<Tensor> biases = {Tensor(), fill({8}, 0.3), fill({6}, 0.3), fill({classes}, 0.3)};
  return NetworkModel::create(std::move(name), input_shape, std::move(layers), std::move(weights),
                              std::move(biases));
}

Tensor random_input(std::mt19937_64& rng, const Shape& shape, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(element_count(shape));
  for (double& x : v) x = u(rng);
  return Tensor(shape, std::move(v));
}

std::filesystem::path temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
             ("dnncov_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace dnncov::testing

namespace dnncov::testing {

double naive_objective(std::span<const NetworkModel> models, const std::vector<double>& input,
                       const ObjectiveSpec& spec) {
  double cov = 0.0;
  for (const auto& t : spec.terms) {
    auto values = naive_coverage_values(models[t.model], input);
    cov += t.sign * t.weight * values[t.neuron.coverage_layer][t.neuron.neuron];
  }
  double total = spec.coverage_weight * cov;
  if (spec.differential) {
    for (std::size_t m = 0; m < models.size(); ++m) {
      auto out = naive_forward(models[m], input).back().out;
      if (!models[m].ends_in_softmax()) out = activate(Activation::kSoftmax, out);
      total += spec.differential->coefficients[m] * out[spec.differential->label];
    }
  }
  return total;
}

GradientCheck check_gradient(std::span<const NetworkModel> models, const Tensor& input, const ObjectiveSpec& spec,
                             double h, double floor) {
  GradientCheck r;
  const Tensor g = input_gradient(models, input, spec);
  std::vector<std::vector<std::size_t>> base_sig;
  for (const auto& m : models) base_sig.push_back(kink_signature(m, input.values()));
  for (std::size_t i = 0; i < input.size(); ++i) {
    std::vector<double> plus = input.values(), minus = input.values();
    plus[i] += h;
    minus[i] -= h;
    bool smooth = true;
    for (std::size_t m = 0; m < models.size() && smooth; ++m)
      smooth = kink_signature(models[m], plus) == base_sig[m] && kink_signature(models[m], minus) == base_sig[m];
    if (!smooth) {
      ++r.skipped;
      continue;
    }
    const double fd = (naive_objective(models, plus, spec) - naive_objective(models, minus, spec)) / (2.0 * h);
    const double denom = std::max({std::abs(g[i]), std::abs(fd), floor});
    r.max_rel_error = std::max(r.max_rel_error, std::abs(g[i] - fd) / denom);
    ++r.checked;
  }
  return r;
}

ObjectiveSpec random_objective(std::mt19937_64& rng, std::span<const NetworkModel> models) {
  ObjectiveSpec spec;
  std::uniform_real_distribution<double> u(0.1, 2.0);
  spec.coverage_weight = u(rng);
  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto& sizes = models[m].coverage_layer_sizes();
    for (std::size_t l = 0; l < sizes.size(); ++l) {
      const std::size_t n = rng() % sizes[l];
      spec.terms.push_back({m, {l, n}, (rng() % 2) ? +1 : -1, u(rng)});
    }
  }
  if (models.size() >= 2) {
    DifferentialTerm d;
    d.label = rng() % models.front().class_count();
    for (std::size_t m = 0; m < models.size(); ++m) d.coefficients.push_back(m == 0 ? -u(rng) : 1.0);
    spec.differential = d;
  }
  return spec;
}

}  // namespace dnncov::testing

#include "lenet.hpp"

#include <cmath>
#include <random>

namespace bench {

using namespace dnncov;

NetworkModel lenet5(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  auto fill = [&](Shape s, std::size_t fan_in) {
    std::vector<double> v(element_count(s));
    for (double& x : v) x = nd(rng) / std::sqrt(static_cast<double>(fan_in));
    return Tensor(std::move(s), std::move(v));
  };
  std::vector<LayerSpec> layers = {
      LayerSpec::conv2d({1, 6, 5, 5, 1, 2}, Activation::kRelu),  LayerSpec::max_pool(2, 2),
      LayerSpec::conv2d({6, 16, 5, 5, 1, 0}, Activation::kRelu), LayerSpec::max_pool(2, 2),
      LayerSpec::flatten(),
      LayerSpec::dense(400, 120, Activation::kRelu),
      LayerSpec::dense(120, 84, Activation::kRelu),
      LayerSpec::dense(84, 10, Activation::kSoftmax),
  };
  std::vector<Tensor> w = {fill({6, 1, 5, 5}, 25), Tensor(), fill({16, 6, 5, 5}, 150), Tensor(), Tensor(),
                           fill({120, 400}, 400), fill({84, 120}, 120), fill({10, 84}, 84)};
  std::vector<Tensor> b = {fill({6}, 4), Tensor(), fill({16}, 4), Tensor(), Tensor(),
                           fill({120}, 4), fill({84}, 4), fill({10}, 4)};
  return NetworkModel::create("lenet5", {1, 28, 28}, std::move(layers), std::move(w), std::move(b));
}

Tensor random_image(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> px(28 * 28);
  for (double& p : px) p = u(rng);
  return Tensor({1, 28, 28}, std::move(px));
}

}  // namespace bench

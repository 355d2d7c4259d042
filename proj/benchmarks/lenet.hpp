#pragma once

#include <cstdint>

#include "dnncov/model.hpp"
#include "dnncov/tensor.hpp"

namespace bench {

// LeNet-5 layer shapes with random weights; coverage layers
// conv1(6) conv2(16) fc120 fc84, 614,400 triplets.
dnncov::NetworkModel lenet5(std::uint64_t seed);

dnncov::Tensor random_image(std::uint64_t seed);

}  // namespace bench

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string_view>

#include "hierdoc/rng.hpp"
#include "hierdoc/tensor.hpp"

namespace hierdoc::nn::detail {

inline CounterRng init_stream(std::uint64_t seed, std::size_t layer_index, std::string_view param) {
  return CounterRng(seed, "init").derive(layer_index).derive(fnv1a64(param));
}

template <typename T>
Tensor<T> glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, CounterRng rng) {
  Tensor<T> t(std::move(shape));
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.values()) v = static_cast<T>((2.0 * rng.uniform() - 1.0) * limit);
  return t;
}

template <typename T>
T sigmoid(T x) {
  return x >= T{0} ? T{1} / (T{1} + std::exp(-x)) : std::exp(x) / (T{1} + std::exp(x));
}

}  // namespace hierdoc::nn::detail

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "hierdoc/layers.hpp"

namespace hierdoc::nn {

/// Trainable parameters of a model (owned by its layers) plus the Adam
/// step counter.
template <typename T>
struct ParamSet {
  std::vector<Param<T>*> params;
  std::uint64_t step = 0;

  void zero_grad();
  std::size_t count() const;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam; increments params.step once.
template <typename T>
void adam_step(ParamSet<T>& params, const AdamConfig& config);

}  // namespace hierdoc::nn

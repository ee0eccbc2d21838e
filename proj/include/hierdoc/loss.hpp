// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "hierdoc/tensor.hpp"

namespace hierdoc::nn {

template <typename T>
struct LossResult {
  T loss;
  Tensor<T> dlogits;
};

/// Mean over the batch of -log softmax(logits)[label], via log-sum-exp.
/// dlogits = (softmax - onehot) / B.
template <typename T>
LossResult<T> softmax_crossentropy(const Tensor<T>& logits, std::span<const std::size_t> labels);

/// Row-wise softmax probabilities.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

/// Index of the row maximum; ties go to the lowest index.
template <typename T>
std::size_t argmax_row(const Tensor<T>& logits, std::size_t row);

}  // namespace hierdoc::nn

// SPDX-License-Identifier: Apache-2.0
#include "hierdoc/loss.hpp"

#include <cmath>
#include <limits>

namespace hierdoc::nn {

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw FormatError("softmax: expects [B, C]");
  Tensor<T> p = logits;
  const std::size_t B = p.dim(0), C = p.dim(1);
  for (std::size_t b = 0; b < B; ++b) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t c = 0; c < C; ++c) mx = std::max(mx, p.at(b, c));
    T sum = 0;
    for (std::size_t c = 0; c < C; ++c) sum += (p.at(b, c) = std::exp(p.at(b, c) - mx));
    for (std::size_t c = 0; c < C; ++c) p.at(b, c) /= sum;
  }
  return p;
}

template <typename T>
LossResult<T> softmax_crossentropy(const Tensor<T>& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size() || labels.empty()) {
    throw FormatError("softmax_crossentropy: logits " + shape_str(logits.shape()) + " vs " +
                      std::to_string(labels.size()) + " labels");
  }
  const std::size_t B = logits.dim(0), C = logits.dim(1);
  LossResult<T> r{T{0}, Tensor<T>({B, C})};
  for (std::size_t b = 0; b < B; ++b) {
    if (labels[b] >= C) throw FormatError("softmax_crossentropy: label out of range");
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t c = 0; c < C; ++c) mx = std::max(mx, logits.at(b, c));
    T sum = 0;
    for (std::size_t c = 0; c < C; ++c) sum += std::exp(logits.at(b, c) - mx);
    const T log_z = mx + std::log(sum);
    r.loss += log_z - logits.at(b, labels[b]);
    for (std::size_t c = 0; c < C; ++c) {
      const T p = std::exp(logits.at(b, c) - log_z);
      r.dlogits.at(b, c) = (p - (c == labels[b] ? T{1} : T{0})) / static_cast<T>(B);
    }
  }
  r.loss /= static_cast<T>(B);
  return r;
}

template <typename T>
std::size_t argmax_row(const Tensor<T>& logits, std::size_t row) {
  const std::size_t C = logits.dim(1);
  std::size_t best = 0;
  for (std::size_t c = 1; c < C; ++c) {
    if (logits.at(row, c) > logits.at(row, best)) best = c;
  }
  return best;
}

template Tensor<float> softmax(const Tensor<float>&);
template Tensor<double> softmax(const Tensor<double>&);
template LossResult<float> softmax_crossentropy(const Tensor<float>&, std::span<const std::size_t>);
template LossResult<double> softmax_crossentropy(const Tensor<double>&, std::span<const std::size_t>);
template std::size_t argmax_row(const Tensor<float>&, std::size_t);
template std::size_t argmax_row(const Tensor<double>&, std::size_t);

}  // namespace hierdoc::nn

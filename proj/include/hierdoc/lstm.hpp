// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "hierdoc/layers.hpp"

namespace hierdoc::nn {

/// Bidirectional LSTM over [B, T, C].
///
/// Each direction owns a packed input kernel [C, 4U], recurrent kernel
/// [U, 4U] and bias [4U] with gate blocks in the order input, forget,
/// candidate, output. Gates use the logistic sigmoid, candidate and cell
/// output use tanh, and both directions start from h = c = 0.
///
/// Row b is processed only over its valid prefix of lengths[b] steps: the
/// forward direction runs t = 0 .. L-1 and the backward direction runs
/// t = L-1 .. 0, so trailing padding never enters the state. With
/// return_sequences the output is [B, T, 2U] (forward features first, zero
/// past the prefix); otherwise it is the pair of final states [B, 2U].
template <typename T>
class BiLstm final : public Layer<T> {
 public:
  BiLstm(const LayerSpec& spec, std::size_t in_features, std::size_t index, std::uint64_t seed);

  std::size_t out_features() const override { return 2 * this->spec_.units; }
  Batch<T> forward(const Batch<T>& in, const ForwardContext& ctx) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::vector<Param<T>*> params() override;

  /// Parameters of one direction: 0 = forward, 1 = backward.
  Param<T>& kernel(int direction) { return dirs_[direction].kernel; }
  Param<T>& recurrent(int direction) { return dirs_[direction].recurrent; }
  Param<T>& bias(int direction) { return dirs_[direction].bias; }

 private:
  struct Direction {
    Param<T> kernel;
    Param<T> recurrent;
    Param<T> bias;
    bool reverse = false;
    // Per time step caches, each [B, U] (h_prev, c_prev, gates, tanh(c)).
    std::vector<Tensor<T>> h_prev, c_prev, gate_i, gate_f, gate_g, gate_o, tanh_c;
    Tensor<T> final_h;  // [B, U]
    Tensor<T> outputs;  // [B, T, U]
  };

  void run(Direction& d, const Tensor<T>& x);
  Tensor<T> unroll_backward(Direction& d, const Tensor<T>& x, const Tensor<T>* d_seq, const Tensor<T>* d_final);

  Direction dirs_[2];
  Tensor<T> input_;
  std::vector<std::size_t> lengths_;
};

}  // namespace hierdoc::nn

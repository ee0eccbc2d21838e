// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hierdoc/gradcheck.hpp"
#include "hierdoc/layers.hpp"
#include "hierdoc/optim.hpp"

namespace hierdoc::heads {

using nn::ForwardContext;
using nn::LayerSpec;
using nn::Mode;
using nn::Tensor;

/// Model names accepted by configs and the CLI.
inline constexpr std::string_view kModelNames[] = {"use_lstm", "use_cnn", "bert_lstm", "bert_cnn", "flat_mean"};

/// 512 for use_*, 768 for bert_*, 0 (any) for flat_mean.
std::size_t required_input_dim(std::string_view model_name);

/// Architecture of a named head as an ordered layer list.
std::vector<LayerSpec> architecture(std::string_view model_name, std::size_t num_classes);

/// A trainable classification head over chunk-embedding sequences
/// [B, T, input_dim], producing raw logits [B, num_classes].
template <typename T>
class HeadModel {
 public:
  HeadModel(std::string name, std::size_t input_dim, std::size_t num_classes, std::vector<LayerSpec> specs,
            std::uint64_t seed);

  HeadModel(HeadModel&&) noexcept = default;
  HeadModel& operator=(HeadModel&&) noexcept = default;

  const std::string& name() const { return name_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t num_classes() const { return num_classes_; }
  const std::vector<LayerSpec>& specs() const { return specs_; }
  std::size_t layer_count() const { return layers_.size(); }
  nn::Layer<T>& layer(std::size_t i) { return *layers_.at(i); }

  /// batch [B, T_max, input_dim]; lengths[b] valid leading chunks of row b
  /// (padding after them must be zero). Empty lengths means all valid.
  Tensor<T> forward(const Tensor<T>& batch, std::span<const std::size_t> lengths, const ForwardContext& ctx);
  /// Same with a [B, T_max] 0/1 chunk mask.
  Tensor<T> forward_masked(const Tensor<T>& batch, const Tensor<T>& mask, const ForwardContext& ctx);
  /// Backpropagates from dL/dlogits of the last forward; accumulates
  /// parameter gradients and returns dL/dbatch.
  Tensor<T> backward(const Tensor<T>& dlogits);

  nn::ParamSet<T>& params() { return params_; }
  std::size_t parameter_count() const { return params_.count(); }

  /// Every tensor persisted in a checkpoint in declaration order: per layer,
  /// its parameters then its buffers.
  std::vector<std::pair<std::string, Tensor<T>*>> state_tensors();

 private:
  std::string name_;
  std::size_t input_dim_;
  std::size_t num_classes_;
  std::vector<LayerSpec> specs_;
  std::vector<std::unique_ptr<nn::Layer<T>>> layers_;
  nn::ParamSet<T> params_;
};

/// BiLSTM(256) -> BiLSTM(128) -> global max -> 2 x [dense relu, dropout 0.4,
/// batchnorm] with 256 and 64 units -> dense(num_classes). Input 512.
template <typename T>
HeadModel<T> build_use_lstm(std::size_t num_classes, std::uint64_t seed);

/// 2 x [conv1d(512, k=1), maxpool(2), dropout 0.5] -> global max ->
/// dense(1024, tanh), dropout 0.5, dense(128, tanh), dropout 0.5 ->
/// dense(num_classes). Input 512.
template <typename T>
HeadModel<T> build_use_cnn(std::size_t num_classes, std::uint64_t seed);

/// BiLSTM(256) -> BiLSTM(128) -> global max -> dense(64, relu) ->
/// dense(num_classes). Input 768.
template <typename T>
HeadModel<T> build_bert_lstm(std::size_t num_classes, std::uint64_t seed);

/// conv1d(512, k=3) -> conv1d(256, k=3) -> global max -> dense(64, relu) ->
/// dense(num_classes). Input 768.
template <typename T>
HeadModel<T> build_bert_cnn(std::size_t num_classes, std::uint64_t seed);

/// Mean over chunks -> dense(num_classes).
template <typename T>
HeadModel<T> build_flat_mean(std::size_t input_dim, std::size_t num_classes, std::uint64_t seed);

/// Dispatch on model name. input_dim is only used by flat_mean; the other
/// heads check it against their fixed width when non-zero.
template <typename T>
HeadModel<T> build_head(std::string_view model_name, std::size_t input_dim, std::size_t num_classes,
                        std::uint64_t seed);

/// Finite-difference check of the full head under softmax cross-entropy,
/// covering the input batch and every parameter tensor. The context is
/// reused for every evaluation, so dropout masks stay fixed.
template <typename T>
nn::GradCheckReport gradient_check(HeadModel<T>& model, const Tensor<T>& batch, std::span<const std::size_t> lengths,
                                   std::span<const std::size_t> labels, const ForwardContext& ctx,
                                   const nn::GradCheckOptions& options);

}  // namespace hierdoc::heads

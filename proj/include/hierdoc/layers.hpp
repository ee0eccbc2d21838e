// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hierdoc/tensor.hpp"

namespace hierdoc::nn {

enum class Mode { train, eval };

enum class LayerKind {
  dense,
  conv1d,
  bilstm,
  maxpool1d,
  global_maxpool,
  mean_pool,
  dropout,
  batchnorm,
  relu,
  tanh,
  softmax,
};

enum class Activation { linear, relu, tanh };

std::string_view to_string(LayerKind kind);
std::string_view to_string(Activation act);
LayerKind parse_layer_kind(std::string_view text);
Activation parse_activation(std::string_view text);

/// Hyperparameters of one layer; only the fields relevant to `kind` are used.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t units = 0;          // dense, conv1d (filters), bilstm (per direction)
  std::size_t kernel_size = 1;    // conv1d
  std::size_t pool_size = 2;      // maxpool1d
  double rate = 0.0;              // dropout
  Activation activation = Activation::linear;  // dense, conv1d
  bool return_sequences = true;   // bilstm
  double momentum = 0.99;         // batchnorm
  double epsilon = 1e-3;          // batchnorm
  /// batchnorm: divide the moving averages by (1 - momentum^updates) so the
  /// initial mean 0 / variance 1 stop weighing in after the first update.
  bool debias = true;

  static LayerSpec dense(std::size_t units, Activation act = Activation::linear);
  static LayerSpec conv1d(std::size_t filters, std::size_t kernel_size,
                          Activation act = Activation::linear);
  static LayerSpec bilstm(std::size_t units, bool return_sequences);
  static LayerSpec maxpool1d(std::size_t pool_size);
  static LayerSpec global_maxpool();
  static LayerSpec mean_pool();
  static LayerSpec dropout(double rate);
  static LayerSpec batchnorm();
  static LayerSpec of(LayerKind kind);

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static LayerSpec from_json(const nlohmann::json& j);
  bool operator==(const LayerSpec&) const = default;
};

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> m;
  Tensor<T> v;

  Param() = default;
  Param(std::string n, Tensor<T> init)
      : name(std::move(n)), value(std::move(init)), grad(value.shape()), m(value.shape()), v(value.shape()) {}
};

/// Activations flowing between layers. For rank-3 values [B, T, C],
/// lengths[b] is the number of valid leading time steps of row b; positions
/// at or past it are zero. Rank-2 values carry no lengths.
template <typename T>
struct Batch {
  Tensor<T> values;
  std::vector<std::size_t> lengths;
};

struct ForwardContext {
  Mode mode = Mode::eval;
  std::uint64_t seed = 0;
  /// Distinguishes forward calls for stochastic layers (dropout masks).
  std::uint64_t step = 0;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  const LayerSpec& spec() const { return spec_; }
  std::size_t in_features() const { return in_features_; }
  virtual std::size_t out_features() const = 0;

  virtual Batch<T> forward(const Batch<T>& in, const ForwardContext& ctx) = 0;
  /// Gradient w.r.t. the last forward input; accumulates parameter grads.
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;

  virtual std::vector<Param<T>*> params() { return {}; }
  /// Non-trainable state saved in checkpoints (batchnorm running stats).
  virtual std::vector<std::pair<std::string, Tensor<T>*>> buffers() { return {}; }

  Layer(LayerSpec spec, std::size_t in_features) : spec_(spec), in_features_(in_features) {}

 protected:
  LayerSpec spec_;
  std::size_t in_features_;
};

/// Builds a layer with initial parameters drawn from streams keyed by
/// (seed, layer index, parameter name).
template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, std::size_t in_features,
                                     std::size_t index, std::uint64_t seed);

// Free-standing kernels used by the layers and exercised directly in tests.

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, Activation act);

template <typename T>
struct DenseGrads {
  Tensor<T> dx, dw, db;
};

/// y is the forward output (activation derivatives are taken from it).
template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& y,
                             const Tensor<T>& dy, Activation act);

/// Same-padded cross-correlation over time: x [B,T,C], k [K,C,F], b [F].
/// Each row only sees its valid prefix; outputs past lengths[b] are zero.
template <typename T>
Tensor<T> conv1d_forward(const Tensor<T>& x, std::span<const std::size_t> lengths, const Tensor<T>& k,
                         const Tensor<T>& b);

template <typename T>
struct Conv1dGrads {
  Tensor<T> dx, dk, db;
};

template <typename T>
Conv1dGrads<T> conv1d_backward(const Tensor<T>& x, std::span<const std::size_t> lengths,
                               const Tensor<T>& k, const Tensor<T>& dy);

/// Windowed max over time with stride = pool_size and floor truncation.
/// Rows shorter than pool_size pass through unchanged.
template <typename T>
struct PoolResult {
  Batch<T> out;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

template <typename T>
PoolResult<T> maxpool1d_forward(const Batch<T>& in, std::size_t pool_size);

/// Per-feature max over the valid time steps: [B,T,C] -> [B,C].
template <typename T>
PoolResult<T> global_maxpool_forward(const Batch<T>& in);

/// Routes each output gradient to its argmax input position.
template <typename T>
Tensor<T> pool_backward(const Shape& input_shape, std::span<const std::size_t> argmax, const Tensor<T>& dy);

/// Prefix lengths from a [B,T] 0/1 mask. Throws if a row is not of the form
/// 1..1 0..0 or has no valid entry.
template <typename T>
std::vector<std::size_t> lengths_from_mask(const Tensor<T>& mask);

}  // namespace hierdoc::nn

// SPDX-License-Identifier: Apache-2.0
#include "hierdoc/layers.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "hierdoc/lstm.hpp"
#include "nn_detail.hpp"

namespace hierdoc::nn {

namespace {

constexpr std::array<std::pair<LayerKind, std::string_view>, 11> kKindNames{{
    {LayerKind::dense, "dense"},
    {LayerKind::conv1d, "conv1d"},
    {LayerKind::bilstm, "bilstm"},
    {LayerKind::maxpool1d, "maxpool1d"},
    {LayerKind::global_maxpool, "global_maxpool"},
    {LayerKind::mean_pool, "mean_pool"},
    {LayerKind::dropout, "dropout"},
    {LayerKind::batchnorm, "batchnorm"},
    {LayerKind::relu, "relu"},
    {LayerKind::tanh, "tanh"},
    {LayerKind::softmax, "softmax"},
}};

template <typename T>
T activate(T z, Activation act) {
  switch (act) {
    case Activation::relu: return z > T{0} ? z : T{0};
    case Activation::tanh: return std::tanh(z);
    case Activation::linear: break;
  }
  return z;
}

// Derivative expressed through the activation output y.
template <typename T>
T activate_grad(T y, Activation act) {
  switch (act) {
    case Activation::relu: return y > T{0} ? T{1} : T{0};
    case Activation::tanh: return T{1} - y * y;
    case Activation::linear: break;
  }
  return T{1};
}

template <typename T>
std::vector<std::size_t> full_lengths(const Tensor<T>& x) {
  return std::vector<std::size_t>(x.dim(0), x.dim(1));
}

template <typename T>
void add_to(Tensor<T>& acc, const Tensor<T>& delta) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += delta[i];
}

// ---------------------------------------------------------------------------

template <typename T>
class DenseLayer final : public Layer<T> {
 public:
  DenseLayer(const LayerSpec& spec, std::size_t in, std::size_t index, std::uint64_t seed)
      : Layer<T>(spec, in),
        w_("kernel", detail::glorot_uniform<T>({in, spec.units}, in, spec.units,
                                               detail::init_stream(seed, index, "kernel"))),
        b_("bias", Tensor<T>({spec.units})) {}

  std::size_t out_features() const override { return this->spec_.units; }

  Batch<T> forward(const Batch<T>& in, const ForwardContext&) override {
    if (in.values.rank() != 2) throw FormatError("dense: expects rank-2 input, got " + shape_str(in.values.shape()));
    x_ = in.values;
    y_ = dense_forward(x_, w_.value, b_.value, this->spec_.activation);
    return {y_, {}};
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    auto g = dense_backward(x_, w_.value, y_, dy, this->spec_.activation);
    add_to(w_.grad, g.dw);
    add_to(b_.grad, g.db);
    return std::move(g.dx);
  }

  std::vector<Param<T>*> params() override { return {&w_, &b_}; }

 private:
  Param<T> w_, b_;
  Tensor<T> x_, y_;
};

template <typename T>
class Conv1dLayer final : public Layer<T> {
 public:
  Conv1dLayer(const LayerSpec& spec, std::size_t in, std::size_t index, std::uint64_t seed)
      : Layer<T>(spec, in),
        k_("kernel", detail::glorot_uniform<T>({spec.kernel_size, in, spec.units}, spec.kernel_size * in,
                                               spec.kernel_size * spec.units,
                                               detail::init_stream(seed, index, "kernel"))),
        b_("bias", Tensor<T>({spec.units})) {}

  std::size_t out_features() const override { return this->spec_.units; }

  Batch<T> forward(const Batch<T>& in, const ForwardContext&) override {
    if (in.values.rank() != 3) throw FormatError("conv1d: expects rank-3 input");
    x_ = in.values;
    lengths_ = in.lengths.empty() ? full_lengths(x_) : in.lengths;
    y_ = conv1d_forward<T>(x_, lengths_, k_.value, b_.value);
    if (this->spec_.activation != Activation::linear) {
      for (auto& v : y_.values()) v = activate(v, this->spec_.activation);
    }
    return {y_, lengths_};
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dz = dy;
    if (this->spec_.activation != Activation::linear) {
      for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= activate_grad(y_[i], this->spec_.activation);
    }
    auto g = conv1d_backward<T>(x_, lengths_, k_.value, dz);
    add_to(k_.grad, g.dk);
    add_to(b_.grad, g.db);
    return std::move(g.dx);
  }

  std::vector<Param<T>*> params() override { return {&k_, &b_}; }

 private:
  Param<T> k_, b_;
  Tensor<T> x_, y_;
  std::vector<std::size_t> lengths_;
};

template <typename T>
class MaxPool1dLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  std::size_t out_features() const override { return this->in_features_; }

  Batch<T> forward(const Batch<T>& in, const ForwardContext&) override {
    input_shape_ = in.values.shape();
    auto r = maxpool1d_forward(in, this->spec_.pool_size);
    argmax_ = std::move(r.argmax);
    return std::move(r.out);
  }
  Tensor<T> backward(const Tensor<T>& dy) override { return pool_backward(input_shape_, argmax_, dy); }

 private:
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

template <typename T>
class GlobalMaxPoolLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  std::size_t out_features() const override { return this->in_features_; }

  Batch<T> forward(const Batch<T>& in, const ForwardContext&) override {
    input_shape_ = in.values.shape();
    auto r = global_maxpool_forward(in);
    argmax_ = std::move(r.argmax);
    return std::move(r.out);
  }
  Tensor<T> backward(const Tensor<T>& dy) override { return pool_backward(input_shape_, argmax_, dy); }

 private:
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

// Mean over the valid time steps: [B,T,C] -> [B,C].
template <typename T>
class MeanPoolLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  std::size_t out_features() const override { return this->in_features_; }

  Batch<T> forward(const Batch<T>& in, const ForwardContext&) override {
    if (in.values.rank() != 3) throw FormatError("mean_pool: expects rank-3 input");
    const auto& x = in.values;
    input_shape_ = x.shape();
    lengths_ = in.lengths.empty() ? full_lengths(x) : in.lengths;
    const std::size_t B = x.dim(0), C = x.dim(2);
    Tensor<T> y({B, C});
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t L = lengths_[b];
      if (L == 0) throw FormatError("mean_pool: row without valid steps");
      for (std::size_t t = 0; t < L; ++t) {
        for (std::size_t c = 0; c < C; ++c) y.at(b, c) += x.at(b, t, c);
      }
      for (std::size_t c = 0; c < C; ++c) y.at(b, c) /= static_cast<T>(L);
    }
    return {std::move(y), {}};
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dx(input_shape_);
    const std::size_t B = input_shape_[0], C = input_shape_[2];
    for (std::size_t b = 0; b < B; ++b) {
      const T scale = T{1} / static_cast<T>(lengths_[b]);
      for (std::size_t t = 0; t < lengths_[b]; ++t) {
        for (std::size_t c = 0; c < C; ++c) dx.at(b, t, c) = dy.at(b, c) * scale;
      }
    }
    return dx;
  }

 private:
  Shape input_shape_;
  std::vector<std::size_t> lengths_;
};

/// Inverted dropout. Masks come from a stream keyed by (seed, layer index,
/// step), so a forward call is reproducible given its context.
template <typename T>
class DropoutLayer final : public Layer<T> {
 public:
  DropoutLayer(const LayerSpec& spec, std::size_t in, std::size_t index, std::uint64_t)
      : Layer<T>(spec, in), index_(index) {}
  std::size_t out_features() const override { return this->in_features_; }

  Batch<T> forward(const Batch<T>& in, const ForwardContext& ctx) override {
    const double rate = this->spec_.rate;
    if (ctx.mode == Mode::eval || rate == 0.0) {
      mask_.clear();
      return in;
    }
    CounterRng rng = CounterRng(ctx.seed, "dropout").derive(index_).derive(ctx.step);
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    Batch<T> out = in;
    mask_.assign(in.values.size(), T{0});
    for (std::size_t i = 0; i < mask_.size(); ++i) {
      mask_[i] = rng.uniform() < rate ? T{0} : scale;
      out.values[i] *= mask_[i];
    }
    return out;
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    if (mask_.empty()) return dy;
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask_[i];
    return dx;
  }

 private:
  std::size_t index_;
  std::vector<T> mask_;
};

/// Batch normalization over [B, F]. Train mode normalizes with the biased
/// batch variance and updates running = momentum * running + (1 - momentum)
/// * batch; eval mode uses the running statistics. With debias the running
/// statistics are that average renormalized by 1 - momentum^updates, i.e.
/// a weighted mean of the batch statistics seen so far.
template <typename T>
class BatchNormLayer final : public Layer<T> {
 public:
  BatchNormLayer(const LayerSpec& spec, std::size_t in, std::size_t, std::uint64_t)
      : Layer<T>(spec, in),
        gamma_("gamma", Tensor<T>({in}, T{1})),
        beta_("beta", Tensor<T>({in})),
        running_mean_({in}),
        running_var_({in}, T{1}),
        updates_({1}) {}

  std::size_t out_features() const override { return this->in_features_; }

  Batch<T> forward(const Batch<T>& in, const ForwardContext& ctx) override {
    const auto& x = in.values;
    if (x.rank() != 2 || x.dim(1) != this->in_features_) {
      throw FormatError("batchnorm: bad input shape " + shape_str(x.shape()));
    }
    const std::size_t B = x.dim(0), F = x.dim(1);
    const T eps = static_cast<T>(this->spec_.epsilon);
    train_ = ctx.mode == Mode::train;
    xhat_ = Tensor<T>(x.shape());
    inv_std_ = Tensor<T>({F});
    Tensor<T> y(x.shape());
    if (train_) {
      const T momentum = static_cast<T>(this->spec_.momentum);
      // Weights of the previous running value and of this batch.
      T keep = momentum, take = T{1} - momentum;
      if (this->spec_.debias) {
        const double mu = this->spec_.momentum;
        const double t = static_cast<double>(updates_[0]) + 1.0;
        const double w_prev = 1.0 - std::pow(mu, t - 1.0), w = 1.0 - std::pow(mu, t);
        keep = static_cast<T>(mu * w_prev / w);
        take = static_cast<T>((1.0 - mu) / w);
      }
      updates_[0] += T{1};
      for (std::size_t f = 0; f < F; ++f) {
        T mean = 0, var = 0;
        for (std::size_t b = 0; b < B; ++b) mean += x.at(b, f);
        mean /= static_cast<T>(B);
        for (std::size_t b = 0; b < B; ++b) var += (x.at(b, f) - mean) * (x.at(b, f) - mean);
        var /= static_cast<T>(B);
        inv_std_[f] = T{1} / std::sqrt(var + eps);
        running_mean_[f] = keep * running_mean_[f] + take * mean;
        running_var_[f] = keep * running_var_[f] + take * var;
        for (std::size_t b = 0; b < B; ++b) xhat_.at(b, f) = (x.at(b, f) - mean) * inv_std_[f];
      }
    } else {
      for (std::size_t f = 0; f < F; ++f) {
        inv_std_[f] = T{1} / std::sqrt(running_var_[f] + eps);
        for (std::size_t b = 0; b < B; ++b) xhat_.at(b, f) = (x.at(b, f) - running_mean_[f]) * inv_std_[f];
      }
    }
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t f = 0; f < F; ++f) y.at(b, f) = gamma_.value[f] * xhat_.at(b, f) + beta_.value[f];
    }
    return {std::move(y), {}};
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    const std::size_t B = dy.dim(0), F = dy.dim(1);
    Tensor<T> dx(dy.shape());
    for (std::size_t f = 0; f < F; ++f) {
      T sum_dy = 0, sum_dy_xhat = 0;
      for (std::size_t b = 0; b < B; ++b) {
        sum_dy += dy.at(b, f);
        sum_dy_xhat += dy.at(b, f) * xhat_.at(b, f);
      }
      gamma_.grad[f] += sum_dy_xhat;
      beta_.grad[f] += sum_dy;
      const T g = gamma_.value[f] * inv_std_[f];
      if (train_) {
        const T n = static_cast<T>(B);
        for (std::size_t b = 0; b < B; ++b) {
          dx.at(b, f) = g * (dy.at(b, f) - sum_dy / n - xhat_.at(b, f) * sum_dy_xhat / n);
        }
      } else {
        for (std::size_t b = 0; b < B; ++b) dx.at(b, f) = g * dy.at(b, f);
      }
    }
    return dx;
  }

  std::vector<Param<T>*> params() override { return {&gamma_, &beta_}; }
  std::vector<std::pair<std::string, Tensor<T>*>> buffers() override {
    return {{"running_mean", &running_mean_}, {"running_var", &running_var_}, {"updates", &updates_}};
  }

 private:
  Param<T> gamma_, beta_;
  Tensor<T> running_mean_, running_var_, updates_;
  Tensor<T> xhat_, inv_std_;
  bool train_ = false;
};

template <typename T>
class ActivationLayer final : public Layer<T> {
 public:
  ActivationLayer(const LayerSpec& spec, std::size_t in, Activation act) : Layer<T>(spec, in), act_(act) {}
  std::size_t out_features() const override { return this->in_features_; }

  Batch<T> forward(const Batch<T>& in, const ForwardContext&) override {
    Batch<T> out = in;
    for (auto& v : out.values.values()) v = activate(v, act_);
    y_ = out.values;
    return out;
  }
  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= activate_grad(y_[i], act_);
    return dx;
  }

 private:
  Activation act_;
  Tensor<T> y_;
};

template <typename T>
class SoftmaxLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  std::size_t out_features() const override { return this->in_features_; }

  Batch<T> forward(const Batch<T>& in, const ForwardContext&) override {
    if (in.values.rank() != 2) throw FormatError("softmax: expects rank-2 input");
    y_ = in.values;
    const std::size_t B = y_.dim(0), C = y_.dim(1);
    for (std::size_t b = 0; b < B; ++b) {
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t c = 0; c < C; ++c) mx = std::max(mx, y_.at(b, c));
      T sum = 0;
      for (std::size_t c = 0; c < C; ++c) sum += (y_.at(b, c) = std::exp(y_.at(b, c) - mx));
      for (std::size_t c = 0; c < C; ++c) y_.at(b, c) /= sum;
    }
    return {y_, {}};
  }

  Tensor<T> backward(const Tensor<T>& dy) override {
    Tensor<T> dx(dy.shape());
    const std::size_t B = dy.dim(0), C = dy.dim(1);
    for (std::size_t b = 0; b < B; ++b) {
      T dot = 0;
      for (std::size_t c = 0; c < C; ++c) dot += dy.at(b, c) * y_.at(b, c);
      for (std::size_t c = 0; c < C; ++c) dx.at(b, c) = y_.at(b, c) * (dy.at(b, c) - dot);
    }
    return dx;
  }

 private:
  Tensor<T> y_;
};

}  // namespace

std::string_view to_string(LayerKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

LayerKind parse_layer_kind(std::string_view text) {
  for (const auto& [k, name] : kKindNames) {
    if (name == text) return k;
  }
  throw FormatError("unknown layer kind '" + std::string(text) + "'");
}

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::linear: break;
  }
  return "linear";
}

Activation parse_activation(std::string_view text) {
  if (text == "linear") return Activation::linear;
  if (text == "relu") return Activation::relu;
  if (text == "tanh") return Activation::tanh;
  throw FormatError("unknown activation '" + std::string(text) + "'");
}

LayerSpec LayerSpec::of(LayerKind kind) {
  LayerSpec s;
  s.kind = kind;
  return s;
}

LayerSpec LayerSpec::dense(std::size_t units, Activation act) {
  LayerSpec s = of(LayerKind::dense);
  s.units = units;
  s.activation = act;
  return s;
}

LayerSpec LayerSpec::conv1d(std::size_t filters, std::size_t kernel_size, Activation act) {
  LayerSpec s = of(LayerKind::conv1d);
  s.units = filters;
  s.kernel_size = kernel_size;
  s.activation = act;
  return s;
}

LayerSpec LayerSpec::bilstm(std::size_t units, bool return_sequences) {
  LayerSpec s = of(LayerKind::bilstm);
  s.units = units;
  s.return_sequences = return_sequences;
  return s;
}

LayerSpec LayerSpec::maxpool1d(std::size_t pool_size) {
  LayerSpec s = of(LayerKind::maxpool1d);
  s.pool_size = pool_size;
  return s;
}

LayerSpec LayerSpec::global_maxpool() { return of(LayerKind::global_maxpool); }
LayerSpec LayerSpec::mean_pool() { return of(LayerKind::mean_pool); }

LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec s = of(LayerKind::dropout);
  s.rate = rate;
  return s;
}

LayerSpec LayerSpec::batchnorm() { return of(LayerKind::batchnorm); }

void LayerSpec::validate() const {
  const std::string name(to_string(kind));
  switch (kind) {
    case LayerKind::dense:
    case LayerKind::bilstm:
      if (units < 1) throw FormatError(name + ": units must be >= 1");
      break;
    case LayerKind::conv1d:
      if (units < 1) throw FormatError(name + ": filters must be >= 1");
      if (kernel_size != 1 && kernel_size != 3 && kernel_size != 5) {
        throw FormatError(name + ": kernel_size must be 1, 3 or 5");
      }
      break;
    case LayerKind::maxpool1d:
      if (pool_size < 1) throw FormatError(name + ": pool_size must be >= 1");
      break;
    case LayerKind::dropout:
      if (!(rate >= 0.0 && rate < 1.0)) throw FormatError(name + ": rate must be in [0, 1)");
      break;
    case LayerKind::batchnorm:
      if (!(momentum >= 0.0 && momentum < 1.0) || !(epsilon > 0.0)) {
        throw FormatError(name + ": invalid momentum/epsilon");
      }
      break;
    default:
      break;
  }
}

nlohmann::ordered_json LayerSpec::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = std::string(to_string(kind));
  switch (kind) {
    case LayerKind::dense:
      j["units"] = units;
      j["activation"] = std::string(to_string(activation));
      break;
    case LayerKind::conv1d:
      j["units"] = units;
      j["kernel_size"] = kernel_size;
      j["activation"] = std::string(to_string(activation));
      break;
    case LayerKind::bilstm:
      j["units"] = units;
      j["return_sequences"] = return_sequences;
      break;
    case LayerKind::maxpool1d:
      j["pool_size"] = pool_size;
      break;
    case LayerKind::dropout:
      j["rate"] = rate;
      break;
    case LayerKind::batchnorm:
      j["momentum"] = momentum;
      j["epsilon"] = epsilon;
      j["debias"] = debias;
      break;
    default:
      break;
  }
  return nlohmann::json(j);
}

LayerSpec LayerSpec::from_json(const nlohmann::json& j) {
  LayerSpec s = of(parse_layer_kind(j.at("kind").get<std::string>()));
  s.units = j.value("units", s.units);
  s.kernel_size = j.value("kernel_size", s.kernel_size);
  s.pool_size = j.value("pool_size", s.pool_size);
  s.rate = j.value("rate", s.rate);
  s.activation = parse_activation(j.value("activation", std::string("linear")));
  s.return_sequences = j.value("return_sequences", s.return_sequences);
  s.momentum = j.value("momentum", s.momentum);
  s.epsilon = j.value("epsilon", s.epsilon);
  s.debias = j.value("debias", s.debias);
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, Activation act) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0) || b.rank() != 1 || b.dim(0) != w.dim(1)) {
    throw FormatError("dense: shape mismatch x" + shape_str(x.shape()) + " W" + shape_str(w.shape()) +
                      " b" + shape_str(b.shape()));
  }
  const std::size_t B = x.dim(0), I = x.dim(1), U = w.dim(1);
  Tensor<T> y({B, U});
  for (std::size_t r = 0; r < B; ++r) std::copy(b.data(), b.data() + U, y.data() + r * U);
  gemm<T>(false, false, B, U, I, T{1}, x.data(), w.data(), T{1}, y.data());
  if (act != Activation::linear) {
    for (auto& v : y.values()) v = activate(v, act);
  }
  return y;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& y, const Tensor<T>& dy,
                             Activation act) {
  expect_shape(dy, y.shape(), "dense backward");
  const std::size_t B = x.dim(0), I = x.dim(1), U = w.dim(1);
  Tensor<T> dz = dy;
  if (act != Activation::linear) {
    for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= activate_grad(y[i], act);
  }
  DenseGrads<T> g{Tensor<T>({B, I}), Tensor<T>({I, U}), Tensor<T>({U})};
  gemm<T>(true, false, I, U, B, T{1}, x.data(), dz.data(), T{0}, g.dw.data());
  gemm<T>(false, true, B, I, U, T{1}, dz.data(), w.data(), T{0}, g.dx.data());
  for (std::size_t r = 0; r < B; ++r) {
    for (std::size_t u = 0; u < U; ++u) g.db[u] += dz.at(r, u);
  }
  return g;
}

namespace {

// Rows of the unfolded input: row (b, t) holds x[b, t + j - pad, :] for
// j = 0..K-1, zero outside the valid prefix.
template <typename T>
Tensor<T> im2col(const Tensor<T>& x, std::span<const std::size_t> lengths, std::size_t K) {
  const std::size_t B = x.dim(0), Tn = x.dim(1), C = x.dim(2);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(K - 1) / 2;
  Tensor<T> cols({B * Tn, K * C});
  for (std::size_t b = 0; b < B; ++b) {
    const auto L = static_cast<std::ptrdiff_t>(lengths[b]);
    for (std::ptrdiff_t t = 0; t < L; ++t) {
      T* row = cols.data() + (b * Tn + static_cast<std::size_t>(t)) * K * C;
      for (std::size_t j = 0; j < K; ++j) {
        const std::ptrdiff_t src = t + static_cast<std::ptrdiff_t>(j) - pad;
        if (src < 0 || src >= L) continue;
        const T* in = x.data() + (b * Tn + static_cast<std::size_t>(src)) * C;
        std::copy(in, in + C, row + j * C);
      }
    }
  }
  return cols;
}

template <typename T>
void check_lengths(const Tensor<T>& x, std::span<const std::size_t> lengths, const char* what) {
  if (lengths.size() != x.dim(0)) throw FormatError(std::string(what) + ": lengths size mismatch");
  for (auto L : lengths) {
    if (L > x.dim(1)) throw FormatError(std::string(what) + ": length exceeds time axis");
  }
}

}  // namespace

template <typename T>
Tensor<T> conv1d_forward(const Tensor<T>& x, std::span<const std::size_t> lengths, const Tensor<T>& k,
                         const Tensor<T>& b) {
  if (x.rank() != 3 || k.rank() != 3 || k.dim(1) != x.dim(2) || b.rank() != 1 || b.dim(0) != k.dim(2)) {
    throw FormatError("conv1d: shape mismatch x" + shape_str(x.shape()) + " K" + shape_str(k.shape()));
  }
  if (k.dim(0) % 2 == 0) throw FormatError("conv1d: kernel size must be odd");
  check_lengths(x, lengths, "conv1d");
  const std::size_t B = x.dim(0), Tn = x.dim(1), C = x.dim(2), K = k.dim(0), F = k.dim(2);
  const Tensor<T> cols = im2col(x, lengths, K);
  Tensor<T> y({B, Tn, F});
  gemm<T>(false, false, B * Tn, F, K * C, T{1}, cols.data(), k.data(), T{0}, y.data());
  for (std::size_t r = 0; r < B; ++r) {
    for (std::size_t t = 0; t < lengths[r]; ++t) {
      for (std::size_t f = 0; f < F; ++f) y.at(r, t, f) += b[f];
    }
  }
  return y;
}

template <typename T>
Conv1dGrads<T> conv1d_backward(const Tensor<T>& x, std::span<const std::size_t> lengths, const Tensor<T>& k,
                               const Tensor<T>& dy_in) {
  const std::size_t B = x.dim(0), Tn = x.dim(1), C = x.dim(2), K = k.dim(0), F = k.dim(2);
  expect_shape(dy_in, {B, Tn, F}, "conv1d backward");
  Tensor<T> dy = dy_in;
  for (std::size_t r = 0; r < B; ++r) {
    std::fill(dy.data() + (r * Tn + lengths[r]) * F, dy.data() + (r + 1) * Tn * F, T{0});
  }
  const Tensor<T> cols = im2col(x, lengths, K);
  Conv1dGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(k.shape()), Tensor<T>({F})};
  gemm<T>(true, false, K * C, F, B * Tn, T{1}, cols.data(), dy.data(), T{0}, g.dk.data());
  for (std::size_t i = 0; i < B * Tn; ++i) {
    for (std::size_t f = 0; f < F; ++f) g.db[f] += dy[i * F + f];
  }
  Tensor<T> dcols({B * Tn, K * C});
  gemm<T>(false, true, B * Tn, K * C, F, T{1}, dy.data(), k.data(), T{0}, dcols.data());
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(K - 1) / 2;
  for (std::size_t r = 0; r < B; ++r) {
    const auto L = static_cast<std::ptrdiff_t>(lengths[r]);
    for (std::ptrdiff_t t = 0; t < L; ++t) {
      const T* row = dcols.data() + (r * Tn + static_cast<std::size_t>(t)) * K * C;
      for (std::size_t j = 0; j < K; ++j) {
        const std::ptrdiff_t src = t + static_cast<std::ptrdiff_t>(j) - pad;
        if (src < 0 || src >= L) continue;
        T* out = g.dx.data() + (r * Tn + static_cast<std::size_t>(src)) * C;
        for (std::size_t c = 0; c < C; ++c) out[c] += row[j * C + c];
      }
    }
  }
  return g;
}

template <typename T>
PoolResult<T> maxpool1d_forward(const Batch<T>& in, std::size_t p) {
  const auto& x = in.values;
  if (x.rank() != 3) throw FormatError("maxpool1d: expects rank-3 input");
  if (p == 0) throw FormatError("maxpool1d: pool_size must be >= 1");
  const std::size_t B = x.dim(0), Tn = x.dim(1), C = x.dim(2);
  const auto lengths = in.lengths.empty() ? full_lengths(x) : in.lengths;
  check_lengths(x, lengths, "maxpool1d");
  auto out_len = [p](std::size_t L) { return L < p ? L : L / p; };

  PoolResult<T> r;
  r.out.lengths.resize(B);
  std::size_t t_out = out_len(Tn);
  for (std::size_t b = 0; b < B; ++b) {
    r.out.lengths[b] = out_len(lengths[b]);
    t_out = std::max(t_out, r.out.lengths[b]);
  }
  r.out.values = Tensor<T>({B, t_out, C});
  r.argmax.assign(B * t_out * C, std::numeric_limits<std::size_t>::max());
  for (std::size_t b = 0; b < B; ++b) {
    const bool passthrough = lengths[b] < p;
    for (std::size_t t = 0; t < r.out.lengths[b]; ++t) {
      const std::size_t start = passthrough ? t : t * p;
      const std::size_t width = passthrough ? 1 : p;
      for (std::size_t c = 0; c < C; ++c) {
        std::size_t best = (b * Tn + start) * C + c;
        for (std::size_t w = 1; w < width; ++w) {
          const std::size_t idx = (b * Tn + start + w) * C + c;
          if (x[idx] > x[best]) best = idx;
        }
        r.out.values.at(b, t, c) = x[best];
        r.argmax[(b * t_out + t) * C + c] = best;
      }
    }
  }
  return r;
}

template <typename T>
PoolResult<T> global_maxpool_forward(const Batch<T>& in) {
  const auto& x = in.values;
  if (x.rank() != 3) throw FormatError("global_maxpool: expects rank-3 input");
  const std::size_t B = x.dim(0), Tn = x.dim(1), C = x.dim(2);
  const auto lengths = in.lengths.empty() ? full_lengths(x) : in.lengths;
  check_lengths(x, lengths, "global_maxpool");
  PoolResult<T> r;
  r.out.values = Tensor<T>({B, C});
  r.argmax.resize(B * C);
  for (std::size_t b = 0; b < B; ++b) {
    if (lengths[b] == 0) throw FormatError("global_maxpool: row without valid steps");
    for (std::size_t c = 0; c < C; ++c) {
      std::size_t best = b * Tn * C + c;
      for (std::size_t t = 1; t < lengths[b]; ++t) {
        const std::size_t idx = (b * Tn + t) * C + c;
        if (x[idx] > x[best]) best = idx;
      }
      r.out.values.at(b, c) = x[best];
      r.argmax[b * C + c] = best;
    }
  }
  return r;
}

template <typename T>
Tensor<T> pool_backward(const Shape& input_shape, std::span<const std::size_t> argmax, const Tensor<T>& dy) {
  if (dy.size() != argmax.size()) throw FormatError("pool backward: gradient shape mismatch");
  Tensor<T> dx(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    if (argmax[i] != std::numeric_limits<std::size_t>::max()) dx[argmax[i]] += dy[i];
  }
  return dx;
}

template <typename T>
std::vector<std::size_t> lengths_from_mask(const Tensor<T>& mask) {
  if (mask.rank() != 2) throw FormatError("mask: expects [B, T]");
  const std::size_t B = mask.dim(0), Tn = mask.dim(1);
  std::vector<std::size_t> lengths(B);
  for (std::size_t b = 0; b < B; ++b) {
    std::size_t L = 0;
    while (L < Tn && mask.at(b, L) != T{0}) ++L;
    for (std::size_t t = L; t < Tn; ++t) {
      if (mask.at(b, t) != T{0}) throw FormatError("mask: valid positions must form a prefix");
    }
    if (L == 0) throw FormatError("mask: row " + std::to_string(b) + " has no valid chunk");
    lengths[b] = L;
  }
  return lengths;
}

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, std::size_t in, std::size_t index,
                                     std::uint64_t seed) {
  spec.validate();
  switch (spec.kind) {
    case LayerKind::dense: return std::make_unique<DenseLayer<T>>(spec, in, index, seed);
    case LayerKind::conv1d: return std::make_unique<Conv1dLayer<T>>(spec, in, index, seed);
    case LayerKind::bilstm: return std::make_unique<BiLstm<T>>(spec, in, index, seed);
    case LayerKind::maxpool1d: return std::make_unique<MaxPool1dLayer<T>>(spec, in);
    case LayerKind::global_maxpool: return std::make_unique<GlobalMaxPoolLayer<T>>(spec, in);
    case LayerKind::mean_pool: return std::make_unique<MeanPoolLayer<T>>(spec, in);
    case LayerKind::dropout: return std::make_unique<DropoutLayer<T>>(spec, in, index, seed);
    case LayerKind::batchnorm: return std::make_unique<BatchNormLayer<T>>(spec, in, index, seed);
    case LayerKind::relu: return std::make_unique<ActivationLayer<T>>(spec, in, Activation::relu);
    case LayerKind::tanh: return std::make_unique<ActivationLayer<T>>(spec, in, Activation::tanh);
    case LayerKind::softmax: return std::make_unique<SoftmaxLayer<T>>(spec, in);
  }
  throw FormatError("unsupported layer kind");
}

#define HIERDOC_INSTANTIATE(T)                                                                         \
  template Tensor<T> dense_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Activation); \
  template DenseGrads<T> dense_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,         \
                                        const Tensor<T>&, Activation);                                \
  template Tensor<T> conv1d_forward(const Tensor<T>&, std::span<const std::size_t>, const Tensor<T>&, \
                                    const Tensor<T>&);                                                \
  template Conv1dGrads<T> conv1d_backward(const Tensor<T>&, std::span<const std::size_t>,             \
                                          const Tensor<T>&, const Tensor<T>&);                        \
  template PoolResult<T> maxpool1d_forward(const Batch<T>&, std::size_t);                             \
  template PoolResult<T> global_maxpool_forward(const Batch<T>&);                                     \
  template Tensor<T> pool_backward(const Shape&, std::span<const std::size_t>, const Tensor<T>&);     \
  template std::vector<std::size_t> lengths_from_mask(const Tensor<T>&);                              \
  template std::unique_ptr<Layer<T>> make_layer(const LayerSpec&, std::size_t, std::size_t, std::uint64_t);

HIERDOC_INSTANTIATE(float)
HIERDOC_INSTANTIATE(double)
#undef HIERDOC_INSTANTIATE

}  // namespace hierdoc::nn

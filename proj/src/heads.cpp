// SPDX-License-Identifier: Apache-2.0
#include "hierdoc/heads.hpp"

#include <algorithm>

#include "hierdoc/loss.hpp"

namespace hierdoc::heads {

using nn::Activation;

std::size_t required_input_dim(std::string_view model_name) {
  if (model_name == "use_lstm" || model_name == "use_cnn") return 512;
  if (model_name == "bert_lstm" || model_name == "bert_cnn") return 768;
  if (model_name == "flat_mean") return 0;
  throw NotFoundError("unknown model '" + std::string(model_name) + "'");
}

std::vector<LayerSpec> architecture(std::string_view model_name, std::size_t num_classes) {
  if (num_classes < 2) throw Error("a classification head needs at least 2 classes");
  if (model_name == "use_lstm") {
    return {LayerSpec::bilstm(256, true),
            LayerSpec::bilstm(128, true),
            LayerSpec::global_maxpool(),
            LayerSpec::dense(256, Activation::relu),
            LayerSpec::dropout(0.4),
            LayerSpec::batchnorm(),
            LayerSpec::dense(64, Activation::relu),
            LayerSpec::dropout(0.4),
            LayerSpec::batchnorm(),
            LayerSpec::dense(num_classes)};
  }
  if (model_name == "use_cnn") {
    return {LayerSpec::conv1d(512, 1),
            LayerSpec::maxpool1d(2),
            LayerSpec::dropout(0.5),
            LayerSpec::conv1d(512, 1),
            LayerSpec::maxpool1d(2),
            LayerSpec::dropout(0.5),
            LayerSpec::global_maxpool(),
            LayerSpec::dense(1024, Activation::tanh),
            LayerSpec::dropout(0.5),
            LayerSpec::dense(128, Activation::tanh),
            LayerSpec::dropout(0.5),
            LayerSpec::dense(num_classes)};
  }
  if (model_name == "bert_lstm") {
    return {LayerSpec::bilstm(256, true),
            LayerSpec::bilstm(128, true),
            LayerSpec::global_maxpool(),
            LayerSpec::dense(64, Activation::relu),
            LayerSpec::dense(num_classes)};
  }
  if (model_name == "bert_cnn") {
    return {LayerSpec::conv1d(512, 3),
            LayerSpec::conv1d(256, 3),
            LayerSpec::global_maxpool(),
            LayerSpec::dense(64, Activation::relu),
            LayerSpec::dense(num_classes)};
  }
  if (model_name == "flat_mean") {
    return {LayerSpec::mean_pool(), LayerSpec::dense(num_classes)};
  }
  throw NotFoundError("unknown model '" + std::string(model_name) + "'");
}

template <typename T>
HeadModel<T>::HeadModel(std::string name, std::size_t input_dim, std::size_t num_classes,
                        std::vector<LayerSpec> specs, std::uint64_t seed)
    : name_(std::move(name)), input_dim_(input_dim), num_classes_(num_classes), specs_(std::move(specs)) {
  if (input_dim_ == 0) throw Error("head " + name_ + ": input_dim must be positive");
  std::size_t features = input_dim_;
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    layers_.push_back(nn::make_layer<T>(specs_[i], features, i, seed));
    features = layers_.back()->out_features();
    for (auto* p : layers_.back()->params()) params_.params.push_back(p);
  }
  if (features != num_classes_) throw Error("head " + name_ + ": final layer does not emit num_classes logits");
}

template <typename T>
Tensor<T> HeadModel<T>::forward(const Tensor<T>& batch, std::span<const std::size_t> lengths,
                                const ForwardContext& ctx) {
  if (batch.rank() != 3 || batch.dim(2) != input_dim_) {
    throw FormatError("head " + name_ + ": expected [B, T, " + std::to_string(input_dim_) + "], got " +
                      nn::shape_str(batch.shape()));
  }
  if (batch.dim(1) == 0) throw FormatError("head " + name_ + ": empty chunk axis");
  nn::Batch<T> x{batch, {lengths.begin(), lengths.end()}};
  if (x.lengths.empty()) x.lengths.assign(batch.dim(0), batch.dim(1));
  if (x.lengths.size() != batch.dim(0)) throw FormatError("head " + name_ + ": lengths size mismatch");
  for (auto L : x.lengths) {
    if (L == 0 || L > batch.dim(1)) throw FormatError("head " + name_ + ": every row needs 1..T valid chunks");
  }
  for (auto& layer : layers_) x = layer->forward(x, ctx);
  return std::move(x.values);
}

template <typename T>
Tensor<T> HeadModel<T>::forward_masked(const Tensor<T>& batch, const Tensor<T>& mask, const ForwardContext& ctx) {
  const auto lengths = nn::lengths_from_mask(mask);
  if (mask.dim(1) != batch.dim(1)) throw FormatError("head " + name_ + ": mask/batch time axis mismatch");
  return forward(batch, lengths, ctx);
}

template <typename T>
Tensor<T> HeadModel<T>::backward(const Tensor<T>& dlogits) {
  Tensor<T> g = dlogits;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> HeadModel<T>::state_tensors() {
  std::vector<std::pair<std::string, Tensor<T>*>> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string prefix = std::to_string(i) + "." + std::string(nn::to_string(specs_[i].kind)) + ".";
    for (auto* p : layers_[i]->params()) out.emplace_back(prefix + p->name, &p->value);
    for (auto& [name, t] : layers_[i]->buffers()) out.emplace_back(prefix + name, t);
  }
  return out;
}

template <typename T>
HeadModel<T> build_use_lstm(std::size_t num_classes, std::uint64_t seed) {
  return HeadModel<T>("use_lstm", 512, num_classes, architecture("use_lstm", num_classes), seed);
}

template <typename T>
HeadModel<T> build_use_cnn(std::size_t num_classes, std::uint64_t seed) {
  return HeadModel<T>("use_cnn", 512, num_classes, architecture("use_cnn", num_classes), seed);
}

template <typename T>
HeadModel<T> build_bert_lstm(std::size_t num_classes, std::uint64_t seed) {
  return HeadModel<T>("bert_lstm", 768, num_classes, architecture("bert_lstm", num_classes), seed);
}

template <typename T>
HeadModel<T> build_bert_cnn(std::size_t num_classes, std::uint64_t seed) {
  return HeadModel<T>("bert_cnn", 768, num_classes, architecture("bert_cnn", num_classes), seed);
}

template <typename T>
HeadModel<T> build_flat_mean(std::size_t input_dim, std::size_t num_classes, std::uint64_t seed) {
  return HeadModel<T>("flat_mean", input_dim, num_classes, architecture("flat_mean", num_classes), seed);
}

template <typename T>
HeadModel<T> build_head(std::string_view model_name, std::size_t input_dim, std::size_t num_classes,
                        std::uint64_t seed) {
  const std::size_t required = required_input_dim(model_name);
  if (required == 0) return build_flat_mean<T>(input_dim, num_classes, seed);
  if (input_dim != 0 && input_dim != required) {
    throw Error("model " + std::string(model_name) + " expects " + std::to_string(required) +
                "-dim embeddings, provider has " + std::to_string(input_dim));
  }
  return HeadModel<T>(std::string(model_name), required, num_classes, architecture(model_name, num_classes), seed);
}

template <typename T>
nn::GradCheckReport gradient_check(HeadModel<T>& model, const Tensor<T>& batch, std::span<const std::size_t> lengths,
                                   std::span<const std::size_t> labels, const ForwardContext& ctx,
                                   const nn::GradCheckOptions& options) {
  Tensor<T> input = batch;
  model.params().zero_grad();
  const Tensor<T> logits = model.forward(input, lengths, ctx);
  const auto loss = nn::softmax_crossentropy(logits, labels);
  Tensor<T> dinput = model.backward(loss.dlogits);

  std::vector<nn::GradTarget<T>> targets;
  targets.push_back({"input", &input, std::move(dinput)});
  for (std::size_t i = 0; i < model.layer_count(); ++i) {
    for (auto* p : model.layer(i).params()) {
      targets.push_back({std::to_string(i) + "." + p->name, &p->value, p->grad});
    }
  }
  auto loss_fn = [&]() { return nn::softmax_crossentropy(model.forward(input, lengths, ctx), labels).loss; };
  return nn::check_gradients<T>(loss_fn, targets, options);
}

#define HIERDOC_INSTANTIATE(T)                                                                              \
  template class HeadModel<T>;                                                                              \
  template HeadModel<T> build_use_lstm<T>(std::size_t, std::uint64_t);                                      \
  template HeadModel<T> build_use_cnn<T>(std::size_t, std::uint64_t);                                       \
  template HeadModel<T> build_bert_lstm<T>(std::size_t, std::uint64_t);                                     \
  template HeadModel<T> build_bert_cnn<T>(std::size_t, std::uint64_t);                                      \
  template HeadModel<T> build_flat_mean<T>(std::size_t, std::size_t, std::uint64_t);                        \
  template HeadModel<T> build_head<T>(std::string_view, std::size_t, std::size_t, std::uint64_t);           \
  template nn::GradCheckReport gradient_check(HeadModel<T>&, const Tensor<T>&, std::span<const std::size_t>, \
                                              std::span<const std::size_t>, const ForwardContext&,          \
                                              const nn::GradCheckOptions&);

HIERDOC_INSTANTIATE(float)
HIERDOC_INSTANTIATE(double)
#undef HIERDOC_INSTANTIATE

}  // namespace hierdoc::heads

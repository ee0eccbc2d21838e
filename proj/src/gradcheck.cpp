// SPDX-License-Identifier: Apache-2.0
#include "hierdoc/gradcheck.hpp"

#include <cmath>
#include <numeric>

#include "hierdoc/rng.hpp"

namespace hierdoc::nn {

template <typename T>
GradCheckReport check_gradients(const std::function<T()>& loss, std::vector<GradTarget<T>>& targets,
                                const GradCheckOptions& options) {
  GradCheckReport report;
  const T eps = static_cast<T>(options.epsilon);
  const double base = options.kink_tolerance > 0 ? static_cast<double>(loss()) : 0.0;
  for (std::size_t ti = 0; ti < targets.size(); ++ti) {
    auto& target = targets[ti];
    Tensor<T>& value = *target.value;
    if (target.analytic.shape() != value.shape()) {
      throw FormatError("gradient check: analytic gradient shape mismatch for " + target.name);
    }
    std::vector<std::size_t> entries(value.size());
    std::iota(entries.begin(), entries.end(), 0);
    if (options.max_entries_per_tensor > 0 && entries.size() > options.max_entries_per_tensor) {
      CounterRng rng = CounterRng(options.seed, "gradcheck").derive(ti);
      rng.shuffle(std::span<std::size_t>(entries));
      entries.resize(options.max_entries_per_tensor);
    }
    for (std::size_t i : entries) {
      const T saved = value[i];
      value[i] = saved + eps;
      const T plus = loss();
      value[i] = saved - eps;
      const T minus = loss();
      value[i] = saved;
      const double numeric = (static_cast<double>(plus) - static_cast<double>(minus)) / (2.0 * options.epsilon);
      if (options.kink_tolerance > 0) {
        const double fwd = (static_cast<double>(plus) - base) / options.epsilon;
        const double bwd = (base - static_cast<double>(minus)) / options.epsilon;
        const double scale = std::max({std::abs(fwd), std::abs(bwd), options.abs_floor});
        if (std::abs(fwd - bwd) / scale > options.kink_tolerance) {
          ++report.skipped_kinks;
          continue;
        }
      }
      const double analytic = static_cast<double>(target.analytic[i]);
      const double abs_err = std::abs(analytic - numeric);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.abs_floor});
      const double rel = abs_err / denom;
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (rel > report.max_rel_error || report.checked == 0) {
        report.max_rel_error = rel;
        report.worst = target.name + "[" + std::to_string(i) + "]";
      }
      ++report.checked;
    }
  }
  return report;
}

template <typename T>
GradCheckReport gradient_check_layer(Layer<T>& layer, const Batch<T>& input, const ForwardContext& ctx,
                                     const GradCheckOptions& options) {
  Batch<T> x = input;
  Batch<T> y = layer.forward(x, ctx);
  Tensor<T> projection(y.values.shape());
  CounterRng rng(options.seed, "gradcheck/projection");
  for (auto& v : projection.values()) v = static_cast<T>(rng.normal());

  for (auto* p : layer.params()) p->grad.fill(T{0});
  Tensor<T> dx = layer.backward(projection);

  auto loss = [&]() {
    const Batch<T> out = layer.forward(x, ctx);
    T s = 0;
    for (std::size_t i = 0; i < out.values.size(); ++i) s += out.values[i] * projection[i];
    return s;
  };
  std::vector<GradTarget<T>> targets;
  targets.push_back({"input", &x.values, std::move(dx)});
  for (auto* p : layer.params()) targets.push_back({p->name, &p->value, p->grad});
  return check_gradients<T>(loss, targets, options);
}

template GradCheckReport check_gradients(const std::function<float()>&, std::vector<GradTarget<float>>&,
                                         const GradCheckOptions&);
template GradCheckReport check_gradients(const std::function<double()>&, std::vector<GradTarget<double>>&,
                                         const GradCheckOptions&);
template GradCheckReport gradient_check_layer(Layer<float>&, const Batch<float>&, const ForwardContext&,
                                              const GradCheckOptions&);
template GradCheckReport gradient_check_layer(Layer<double>&, const Batch<double>&, const ForwardContext&,
                                              const GradCheckOptions&);

}  // namespace hierdoc::nn

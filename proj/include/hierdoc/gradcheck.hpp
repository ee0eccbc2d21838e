// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hierdoc/layers.hpp"

namespace hierdoc::nn {

/// A tensor whose entries are perturbed, paired with the analytic gradient
/// computed for it.
template <typename T>
struct GradTarget {
  std::string name;
  Tensor<T>* value;
  Tensor<T> analytic;
};

struct GradCheckOptions {
  double epsilon = 1e-5;
  /// Entries checked per tensor; 0 checks every entry. Sampled entries are
  /// chosen from a stream keyed by `seed`.
  std::size_t max_entries_per_tensor = 0;
  std::uint64_t seed = 0;
  /// Denominator floor of the relative error, so entries whose gradients
  /// are both ~0 are judged by absolute error.
  double abs_floor = 1e-6;
  /// When set, entries whose forward and backward one-sided differences
  /// disagree by more than this relative amount straddle a kink (ReLU,
  /// max selection) and are skipped rather than compared. Zero disables.
  double kink_tolerance = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;

  bool passed(double tolerance) const { return checked > 0 && max_rel_error < tolerance; }
};

/// Central differences (L(θ+ε) - L(θ-ε)) / 2ε against the analytic
/// gradients, with relative error |a - n| / max(|a|, |n|, abs_floor).
template <typename T>
GradCheckReport check_gradients(const std::function<T()>& loss, std::vector<GradTarget<T>>& targets,
                                const GradCheckOptions& options);

/// Checks one layer under the scalar loss sum(forward(x) * R) for a fixed
/// random R, covering the input and every parameter.
template <typename T>
GradCheckReport gradient_check_layer(Layer<T>& layer, const Batch<T>& input, const ForwardContext& ctx,
                                     const GradCheckOptions& options);

}  // namespace hierdoc::nn

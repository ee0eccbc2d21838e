// SPDX-License-Identifier: Apache-2.0
#include "hierdoc/optim.hpp"

#include <cmath>

namespace hierdoc::nn {

template <typename T>
void ParamSet<T>::zero_grad() {
  for (auto* p : params) p->grad.fill(T{0});
}

template <typename T>
std::size_t ParamSet<T>::count() const {
  std::size_t n = 0;
  for (const auto* p : params) n += p->value.size();
  return n;
}

template <typename T>
void adam_step(ParamSet<T>& set, const AdamConfig& cfg) {
  ++set.step;
  const double t = static_cast<double>(set.step);
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T correction1 = static_cast<T>(1.0 - std::pow(cfg.beta1, t));
  const T correction2 = static_cast<T>(1.0 - std::pow(cfg.beta2, t));
  const T lr = static_cast<T>(cfg.lr);
  const T eps = static_cast<T>(cfg.epsilon);
  for (auto* p : set.params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const T g = p->grad[i];
      p->m[i] = b1 * p->m[i] + (T{1} - b1) * g;
      p->v[i] = b2 * p->v[i] + (T{1} - b2) * g * g;
      const T m_hat = p->m[i] / correction1;
      const T v_hat = p->v[i] / correction2;
      p->value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template struct ParamSet<float>;
template struct ParamSet<double>;
template void adam_step(ParamSet<float>&, const AdamConfig&);
template void adam_step(ParamSet<double>&, const AdamConfig&);

}  // namespace hierdoc::nn

// SPDX-License-Identifier: Apache-2.0
#include "hierdoc/tensor.hpp"

#include <sstream>

#include <Eigen/Core>

namespace hierdoc::nn {

std::string shape_str(const Shape& shape) {
  std::ostringstream s;
  s << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) s << (i ? "," : "") << shape[i];
  s << ']';
  return s.str();
}

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, const T* b, T beta, T* c) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using CMap = Eigen::Map<const Mat>;
  const auto mi = static_cast<Eigen::Index>(m);
  const auto ni = static_cast<Eigen::Index>(n);
  const auto ki = static_cast<Eigen::Index>(k);
  Eigen::Map<Mat> cm(c, mi, ni);
  if (m == 0 || n == 0) return;
  if (beta == T{0}) {
    cm.setZero();
  } else if (beta != T{1}) {
    cm *= beta;
  }
  if (k == 0) return;
  if (!trans_a && !trans_b) {
    cm.noalias() += alpha * CMap(a, mi, ki) * CMap(b, ki, ni);
  } else if (trans_a && !trans_b) {
    cm.noalias() += alpha * CMap(a, ki, mi).transpose() * CMap(b, ki, ni);
  } else if (!trans_a && trans_b) {
    cm.noalias() += alpha * CMap(a, mi, ki) * CMap(b, ni, ki).transpose();
  } else {
    cm.noalias() += alpha * CMap(a, ki, mi).transpose() * CMap(b, ni, ki).transpose();
  }
}

template void gemm<float>(bool, bool, std::size_t, std::size_t, std::size_t, float, const float*,
                          const float*, float, float*);
template void gemm<double>(bool, bool, std::size_t, std::size_t, std::size_t, double, const double*,
                           const double*, double, double*);

}  // namespace hierdoc::nn

// SPDX-License-Identifier: Apache-2.0
#include "hierdoc/lstm.hpp"

#include <cmath>

#include "nn_detail.hpp"

namespace hierdoc::nn {

template <typename T>
BiLstm<T>::BiLstm(const LayerSpec& spec, std::size_t in, std::size_t index, std::uint64_t seed)
    : Layer<T>(spec, in) {
  const std::size_t U = spec.units;
  const char* prefix[2] = {"fw_", "bw_"};
  for (int d = 0; d < 2; ++d) {
    const std::string p = prefix[d];
    auto& dir = dirs_[d];
    dir.reverse = d == 1;
    dir.kernel = Param<T>(p + "kernel", detail::glorot_uniform<T>({in, 4 * U}, in, 4 * U,
                                                                  detail::init_stream(seed, index, p + "kernel")));
    dir.recurrent = Param<T>(
        p + "recurrent",
        detail::glorot_uniform<T>({U, 4 * U}, U, 4 * U, detail::init_stream(seed, index, p + "recurrent")));
    Tensor<T> bias({4 * U});
    for (std::size_t u = U; u < 2 * U; ++u) bias[u] = T{1};  // forget gate
    dir.bias = Param<T>(p + "bias", std::move(bias));
  }
}

template <typename T>
std::vector<Param<T>*> BiLstm<T>::params() {
  return {&dirs_[0].kernel, &dirs_[0].recurrent, &dirs_[0].bias,
          &dirs_[1].kernel, &dirs_[1].recurrent, &dirs_[1].bias};
}

template <typename T>
void BiLstm<T>::run(Direction& d, const Tensor<T>& x) {
  const std::size_t B = x.dim(0), Tn = x.dim(1), C = x.dim(2), U = this->spec_.units, G = 4 * U;

  // Input projections for every step at once: [B*T, 4U].
  Tensor<T> zx({B * Tn, G});
  for (std::size_t r = 0; r < B * Tn; ++r) std::copy(d.bias.value.data(), d.bias.value.data() + G, zx.data() + r * G);
  gemm<T>(false, false, B * Tn, G, C, T{1}, x.data(), d.kernel.value.data(), T{1}, zx.data());

  for (auto* cache : {&d.h_prev, &d.c_prev, &d.gate_i, &d.gate_f, &d.gate_g, &d.gate_o, &d.tanh_c}) {
    cache->assign(Tn, Tensor<T>());
  }
  d.outputs = Tensor<T>({B, Tn, U});
  Tensor<T> h({B, U}), c({B, U}), z({B, G});

  for (std::size_t s = 0; s < Tn; ++s) {
    const std::size_t t = d.reverse ? Tn - 1 - s : s;
    for (std::size_t b = 0; b < B; ++b) {
      std::copy(zx.data() + (b * Tn + t) * G, zx.data() + (b * Tn + t + 1) * G, z.data() + b * G);
    }
    gemm<T>(false, false, B, G, U, T{1}, h.data(), d.recurrent.value.data(), T{1}, z.data());

    Tensor<T> gi({B, U}), gf({B, U}), gg({B, U}), go({B, U}), tc({B, U});
    d.h_prev[t] = h;
    d.c_prev[t] = c;
    for (std::size_t b = 0; b < B; ++b) {
      if (t >= lengths_[b]) continue;  // state carried unchanged, output stays zero
      const T* zr = z.data() + b * G;
      for (std::size_t u = 0; u < U; ++u) {
        const T i = detail::sigmoid(zr[u]);
        const T f = detail::sigmoid(zr[U + u]);
        const T g = std::tanh(zr[2 * U + u]);
        const T o = detail::sigmoid(zr[3 * U + u]);
        const T cn = f * c.at(b, u) + i * g;
        const T th = std::tanh(cn);
        gi.at(b, u) = i;
        gf.at(b, u) = f;
        gg.at(b, u) = g;
        go.at(b, u) = o;
        tc.at(b, u) = th;
        c.at(b, u) = cn;
        h.at(b, u) = o * th;
        d.outputs.at(b, t, u) = o * th;
      }
    }
    d.gate_i[t] = std::move(gi);
    d.gate_f[t] = std::move(gf);
    d.gate_g[t] = std::move(gg);
    d.gate_o[t] = std::move(go);
    d.tanh_c[t] = std::move(tc);
  }
  d.final_h = std::move(h);
}

template <typename T>
Batch<T> BiLstm<T>::forward(const Batch<T>& in, const ForwardContext&) {
  const auto& x = in.values;
  if (x.rank() != 3 || x.dim(2) != this->in_features_) {
    throw FormatError("bilstm: bad input shape " + shape_str(x.shape()));
  }
  if (x.dim(1) == 0) throw FormatError("bilstm: empty sequence (T == 0)");
  const std::size_t B = x.dim(0), Tn = x.dim(1), U = this->spec_.units;
  input_ = x;
  lengths_ = in.lengths.empty() ? std::vector<std::size_t>(B, Tn) : in.lengths;
  if (lengths_.size() != B) throw FormatError("bilstm: lengths size mismatch");
  for (auto L : lengths_) {
    if (L == 0 || L > Tn) throw FormatError("bilstm: every row needs 1..T valid steps");
  }
  run(dirs_[0], x);
  run(dirs_[1], x);

  Batch<T> out;
  if (this->spec_.return_sequences) {
    out.values = Tensor<T>({B, Tn, 2 * U});
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t t = 0; t < Tn; ++t) {
        for (std::size_t u = 0; u < U; ++u) {
          out.values.at(b, t, u) = dirs_[0].outputs.at(b, t, u);
          out.values.at(b, t, U + u) = dirs_[1].outputs.at(b, t, u);
        }
      }
    }
    out.lengths = lengths_;
  } else {
    out.values = Tensor<T>({B, 2 * U});
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t u = 0; u < U; ++u) {
        out.values.at(b, u) = dirs_[0].final_h.at(b, u);
        out.values.at(b, U + u) = dirs_[1].final_h.at(b, u);
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> BiLstm<T>::unroll_backward(Direction& d, const Tensor<T>& x, const Tensor<T>* d_seq,
                                     const Tensor<T>* d_final) {
  const std::size_t B = x.dim(0), Tn = x.dim(1), C = x.dim(2), U = this->spec_.units, G = 4 * U;
  Tensor<T> dh = d_final ? *d_final : Tensor<T>({B, U});
  Tensor<T> dc({B, U});
  Tensor<T> dz_all({B * Tn, G});
  Tensor<T> hprev_all({B * Tn, U});
  Tensor<T> dz({B, G});
  Tensor<T> dh_prev({B, U});

  for (std::size_t s = Tn; s-- > 0;) {
    const std::size_t t = d.reverse ? Tn - 1 - s : s;
    dz.fill(T{0});
    const auto& gi = d.gate_i[t];
    const auto& gf = d.gate_f[t];
    const auto& gg = d.gate_g[t];
    const auto& go = d.gate_o[t];
    const auto& tc = d.tanh_c[t];
    const auto& cp = d.c_prev[t];
    for (std::size_t b = 0; b < B; ++b) {
      std::copy(d.h_prev[t].data() + b * U, d.h_prev[t].data() + (b + 1) * U, hprev_all.data() + (b * Tn + t) * U);
      if (t >= lengths_[b]) continue;
      T* dzr = dz.data() + b * G;
      for (std::size_t u = 0; u < U; ++u) {
        T dhv = dh.at(b, u);
        if (d_seq) dhv += d_seq->at(b, t, u);
        const T i = gi.at(b, u), f = gf.at(b, u), g = gg.at(b, u), o = go.at(b, u), th = tc.at(b, u);
        const T dcv = dc.at(b, u) + dhv * o * (T{1} - th * th);
        dzr[u] = dcv * g * i * (T{1} - i);
        dzr[U + u] = dcv * cp.at(b, u) * f * (T{1} - f);
        dzr[2 * U + u] = dcv * i * (T{1} - g * g);
        dzr[3 * U + u] = dhv * th * o * (T{1} - o);
        dc.at(b, u) = dcv * f;
      }
    }
    gemm<T>(false, true, B, U, G, T{1}, dz.data(), d.recurrent.value.data(), T{0}, dh_prev.data());
    for (std::size_t b = 0; b < B; ++b) {
      if (t >= lengths_[b]) continue;  // invalid steps pass dh and dc through
      std::copy(dh_prev.data() + b * U, dh_prev.data() + (b + 1) * U, dh.data() + b * U);
      std::copy(dz.data() + b * G, dz.data() + (b + 1) * G, dz_all.data() + (b * Tn + t) * G);
    }
  }

  gemm<T>(true, false, C, G, B * Tn, T{1}, x.data(), dz_all.data(), T{1}, d.kernel.grad.data());
  gemm<T>(true, false, U, G, B * Tn, T{1}, hprev_all.data(), dz_all.data(), T{1}, d.recurrent.grad.data());
  for (std::size_t r = 0; r < B * Tn; ++r) {
    for (std::size_t j = 0; j < G; ++j) d.bias.grad[j] += dz_all[r * G + j];
  }
  Tensor<T> dx(x.shape());
  gemm<T>(false, true, B * Tn, C, G, T{1}, dz_all.data(), d.kernel.value.data(), T{0}, dx.data());
  return dx;
}

template <typename T>
Tensor<T> BiLstm<T>::backward(const Tensor<T>& grad_out) {
  const std::size_t B = input_.dim(0), Tn = input_.dim(1), U = this->spec_.units;
  Tensor<T> dx;
  if (this->spec_.return_sequences) {
    expect_shape(grad_out, {B, Tn, 2 * U}, "bilstm backward");
    Tensor<T> fw({B, Tn, U}), bw({B, Tn, U});
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t t = 0; t < Tn; ++t) {
        for (std::size_t u = 0; u < U; ++u) {
          fw.at(b, t, u) = grad_out.at(b, t, u);
          bw.at(b, t, u) = grad_out.at(b, t, U + u);
        }
      }
    }
    dx = unroll_backward(dirs_[0], input_, &fw, nullptr);
    const auto dx_bw = unroll_backward(dirs_[1], input_, &bw, nullptr);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dx_bw[i];
  } else {
    expect_shape(grad_out, {B, 2 * U}, "bilstm backward");
    Tensor<T> fw({B, U}), bw({B, U});
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t u = 0; u < U; ++u) {
        fw.at(b, u) = grad_out.at(b, u);
        bw.at(b, u) = grad_out.at(b, U + u);
      }
    }
    dx = unroll_backward(dirs_[0], input_, nullptr, &fw);
    const auto dx_bw = unroll_backward(dirs_[1], input_, nullptr, &bw);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dx_bw[i];
  }
  return dx;
}

template class BiLstm<float>;
template class BiLstm<double>;

}  // namespace hierdoc::nn

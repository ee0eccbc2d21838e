// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "hierdoc/gradcheck.hpp"
#include "hierdoc/lstm.hpp"
#include "hierdoc/rng.hpp"

using namespace hierdoc;
using namespace hierdoc::nn;

namespace {

Tensor<double> random_tensor(Shape shape, std::uint64_t seed) {
  Tensor<double> t(std::move(shape));
  CounterRng rng(seed, "lstm_test");
  for (auto& v : t.values()) v = rng.normal();
  return t;
}

const ForwardContext kEval{Mode::eval, 0, 0};

}  // namespace

TEST_CASE("parameter layout") {
  BiLstm<double> lstm(LayerSpec::bilstm(6, true), 8, 0, 1);
  CHECK(lstm.params().size() == 6);
  CHECK(lstm.kernel(0).value.shape() == Shape{8, 24});
  CHECK(lstm.recurrent(1).value.shape() == Shape{6, 24});
  CHECK(lstm.bias(0).value.shape() == Shape{24});
  // Forget gate bias starts at 1, the other gates at 0.
  for (std::size_t j = 0; j < 24; ++j) CHECK(lstm.bias(0).value[j] == (j >= 6 && j < 12 ? 1.0 : 0.0));
  std::size_t count = 0;
  for (auto* p : lstm.params()) count += p->value.size();
  CHECK(count == 2 * 4 * ((8 + 6) * 6 + 6));
}

TEST_CASE("all-zero parameters give all-zero output") {
  BiLstm<double> lstm(LayerSpec::bilstm(5, true), 4, 0, 1);
  for (auto* p : lstm.params()) p->value.fill(0.0);
  const auto out = lstm.forward({random_tensor({3, 6, 4}, 2), {6, 6, 6}}, kEval);
  CHECK(out.values.shape() == Shape{3, 6, 10});
  for (double v : out.values.values()) CHECK(v == 0.0);
}

TEST_CASE("time reversal mirrors the two directions") {
  BiLstm<double> lstm(LayerSpec::bilstm(4, true), 3, 0, 7);
  // Share weights across directions so the mirror is exact.
  lstm.kernel(1).value = lstm.kernel(0).value;
  lstm.recurrent(1).value = lstm.recurrent(0).value;
  lstm.bias(1).value = lstm.bias(0).value;
  const std::size_t T = 5;
  const auto x = random_tensor({1, T, 3}, 3);
  Tensor<double> rev(x.shape());
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < 3; ++c) rev.at(0, t, c) = x.at(0, T - 1 - t, c);
  }
  const auto a = lstm.forward({x, {T}}, kEval).values;
  const auto b = lstm.forward({rev, {T}}, kEval).values;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t u = 0; u < 4; ++u) {
      CHECK(b.at(0, t, u) == doctest::Approx(a.at(0, T - 1 - t, 4 + u)).epsilon(1e-12));
    }
  }
}

TEST_CASE("padding after the valid prefix is ignored") {
  BiLstm<double> seq(LayerSpec::bilstm(4, true), 3, 0, 9);
  const auto x = random_tensor({1, 3, 3}, 4);
  Tensor<double> padded({1, 6, 3});
  for (std::size_t i = 0; i < x.size(); ++i) padded[i] = x[i];
  const auto a = seq.forward({x, {3}}, kEval).values;
  const auto b = seq.forward({padded, {3}}, kEval).values;
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t u = 0; u < 8; ++u) CHECK(b.at(0, t, u) == doctest::Approx(a.at(0, t, u)).epsilon(1e-12));
  }
  for (std::size_t t = 3; t < 6; ++t) {
    for (std::size_t u = 0; u < 8; ++u) CHECK(b.at(0, t, u) == 0.0);
  }

  BiLstm<double> last(LayerSpec::bilstm(4, false), 3, 0, 9);
  const auto fa = last.forward({x, {3}}, kEval).values;
  const auto fb = last.forward({padded, {3}}, kEval).values;
  CHECK(fa.shape() == Shape{1, 8});
  for (std::size_t i = 0; i < 8; ++i) CHECK(fb[i] == doctest::Approx(fa[i]).epsilon(1e-12));
}

TEST_CASE("BPTT gradients on a [2,5,8] input with U = 6") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    BiLstm<double> lstm(LayerSpec::bilstm(6, true), 8, 0, seed);
    const auto report =
        gradient_check_layer<double>(lstm, {random_tensor({2, 5, 8}, seed + 10), {5, 5}}, kEval, {.seed = seed});
    CAPTURE(report.worst);
    CHECK(report.passed(1e-3));
  }
}

TEST_CASE("empty sequences are rejected") {
  BiLstm<double> lstm(LayerSpec::bilstm(2, true), 3, 0, 1);
  CHECK_THROWS(lstm.forward({Tensor<double>({1, 0, 3}), {0}}, kEval));
}

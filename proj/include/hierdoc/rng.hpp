// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace hierdoc {

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);

/// Counter-based generator: the i-th draw is a pure function of
/// (key, i). Streams for different stochastic sites are derived from one
/// run seed and a site name, so adding a draw at one site never shifts the
/// numbers seen by another.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::string_view site);
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  /// Independent child stream, e.g. one per epoch or per forward call.
  CounterRng derive(std::uint64_t index) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  /// Standard normal via Box-Muller.
  double normal();
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace hierdoc

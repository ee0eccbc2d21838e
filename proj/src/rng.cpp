// SPDX-License-Identifier: Apache-2.0
#include "hierdoc/rng.hpp"

#include <cmath>
#include <numbers>

namespace hierdoc {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

CounterRng::CounterRng(std::uint64_t seed, std::string_view site)
    : key_(splitmix64(splitmix64(seed) ^ fnv1a64(site))) {}

CounterRng CounterRng::derive(std::uint64_t index) const {
  return CounterRng(splitmix64(key_ ^ splitmix64(index + 0x632BE59BD9B4E019ULL)));
}

std::uint64_t CounterRng::next_u64() {
  return splitmix64(key_ + 0x9E3779B97F4A7C15ULL * counter_++);
}

double CounterRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t CounterRng::below(std::size_t n) {
  // Lemire's multiply-shift; the bias is below 2^-64 * n and irrelevant here.
  const auto wide = static_cast<unsigned __int128>(next_u64()) * n;
  return static_cast<std::size_t>(wide >> 64);
}

}  // namespace hierdoc

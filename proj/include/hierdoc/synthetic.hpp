// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>

#include "hierdoc/corpus.hpp"

namespace hierdoc::synthetic {

/// Random-word documents with balanced labels. The words carry no class
/// information; a separable signal comes only from the hash embedder's
/// class-signal mode.
struct SyntheticSpec {
  std::size_t num_classes = 4;
  std::size_t train_docs = 200;
  std::size_t test_docs = 100;
  std::size_t min_words = 10;
  std::size_t max_words = 200;
  std::size_t vocabulary = 5000;
  std::uint64_t seed = 7;
};

/// Manifest "synthetic" with classes class0..classN-1 and canonical splits.
corpus::Corpus make_corpus(const SyntheticSpec& spec);

}  // namespace hierdoc::synthetic

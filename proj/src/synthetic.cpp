// SPDX-License-Identifier: Apache-2.0
#include "hierdoc/synthetic.hpp"

#include "hierdoc/chunker.hpp"
#include "hierdoc/error.hpp"
#include "hierdoc/rng.hpp"

namespace hierdoc::synthetic {

namespace {

std::string word(std::size_t id) {
  std::string w;
  do {
    w.push_back(static_cast<char>('a' + id % 26));
    id /= 26;
  } while (id > 0);
  return w + "x";
}

}  // namespace

corpus::Corpus make_corpus(const SyntheticSpec& spec) {
  if (spec.num_classes < 2 || spec.num_classes > 100) throw Error("synthetic: num_classes must be in [2, 100]");
  if (spec.min_words < 1 || spec.max_words < spec.min_words) throw Error("synthetic: bad word range");
  if (spec.train_docs < spec.num_classes || spec.test_docs < 1) throw Error("synthetic: too few documents");

  corpus::Corpus c;
  c.manifest.name = "synthetic";
  c.manifest.num_classes = spec.num_classes;
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    c.manifest.class_names.push_back("class" + std::string(k < 10 ? "0" : "") + std::to_string(k));
  }
  c.manifest.avg_words = (spec.min_words + spec.max_words) / 2;
  c.manifest.default_chunk_size = chunker::choose_chunk_size(static_cast<double>(c.manifest.avg_words));
  c.manifest.canonical_split = true;
  c.manifest.train_count = spec.train_docs;
  c.manifest.test_count = spec.test_docs;

  CounterRng rng(spec.seed, "synthetic_corpus");
  const std::size_t total = spec.train_docs + spec.test_docs;
  for (std::size_t i = 0; i < total; ++i) {
    corpus::LabeledDocument d;
    d.doc_id = "syn" + std::to_string(i);
    d.split = i < spec.train_docs ? corpus::Split::train : corpus::Split::test;
    d.label_id = i % spec.num_classes;
    const std::size_t n = spec.min_words + rng.below(spec.max_words - spec.min_words + 1);
    for (std::size_t w = 0; w < n; ++w) {
      if (w) d.raw_text.push_back(' ');
      d.raw_text += word(rng.below(spec.vocabulary));
    }
    c.documents.push_back(std::move(d));
  }
  return c;
}

}  // namespace hierdoc::synthetic

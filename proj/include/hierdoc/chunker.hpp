// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "hierdoc/corpus.hpp"
#include "hierdoc/textprep.hpp"

namespace hierdoc::chunker {

inline constexpr std::size_t kDefaultMaxChunks = 64;

struct ChunkedDocument {
  std::string doc_id;
  std::vector<textprep::TokenSequence> chunks;
  std::size_t chunk_size = 0;
  std::size_t label_id = 0;
  corpus::Split split = corpus::Split::unsplit;
  bool truncated = false;

  std::size_t token_count() const;
  bool operator==(const ChunkedDocument&) const = default;
};

/// Consecutive, non-overlapping runs of chunk_size tokens; the last run may
/// be shorter. Tokens past chunk_size * max_chunks are dropped and the
/// document is flagged truncated.
ChunkedDocument chunk(const textprep::TokenSequence& tokens, std::size_t chunk_size,
                      std::size_t max_chunks = kDefaultMaxChunks);

/// 20 for datasets averaging under 100 words per record, else 50.
std::size_t choose_chunk_size(double avg_words);

/// Chunks of one corpus plus the label names needed to write chunks.jsonl.
struct ChunkedCorpus {
  corpus::DatasetManifest manifest;
  std::vector<ChunkedDocument> documents;
};

/// Preprocesses, tokenizes and chunks every document. Documents that are
/// empty after preprocessing are dropped; their ids are returned in
/// `dropped` when non-null.
ChunkedCorpus chunk_corpus(const corpus::Corpus& corpus, std::size_t chunk_size,
                           std::size_t max_chunks = kDefaultMaxChunks,
                           std::vector<std::string>* dropped = nullptr);

/// One JSON object per line:
/// {"doc_id":..,"label":<class name>,"split":..,"chunks":[[tok,..],..],"truncated":..}
void write_jsonl(std::ostream& out, const ChunkedCorpus& chunks);
void write_jsonl(const std::string& path, const ChunkedCorpus& chunks);

/// Reads chunks.jsonl. Labels are resolved through the manifest when one is
/// given; otherwise class names are collected from the file in sorted order.
ChunkedCorpus read_jsonl(const std::string& path, const corpus::DatasetManifest* manifest = nullptr);

}  // namespace hierdoc::chunker

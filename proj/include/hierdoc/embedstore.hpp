// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hierdoc/chunker.hpp"
#include "hierdoc/textprep.hpp"

namespace hierdoc::embed {

/// On-disk layout, all integers little-endian:
///   header  : magic "HDEMB\0\0\1" | u32 dim | u64 doc_count | char[32] encoder_tag
///   index   : doc_count x { u16 id_len | id bytes | u32 n_chunks | u64 payload_offset }
///   payload : float32 row-major n_chunks x dim matrices
/// payload_offset is absolute from the start of the file.
inline constexpr std::array<char, 8> kMagic{'H', 'D', 'E', 'M', 'B', '\0', '\0', '\1'};
inline constexpr std::size_t kTagSize = 32;
inline constexpr std::size_t kHeaderSize = 8 + 4 + 8 + kTagSize;

/// One document's chunk embeddings, row i = chunk i.
struct DocEmbedding {
  std::string doc_id;
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<float> values;

  std::span<const float> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
  bool operator==(const DocEmbedding&) const = default;
};

/// Frozen source of chunk embeddings: the same doc_id always yields the
/// same bytes.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual std::string encoder_tag() const = 0;
  virtual bool contains(std::string_view doc_id) const = 0;
  /// Throws NotFoundError for unknown ids.
  virtual DocEmbedding lookup(std::string_view doc_id) const = 0;
  /// Row count for doc_id without reading the payload.
  virtual std::size_t rows(std::string_view doc_id) const = 0;
  virtual std::vector<std::string> doc_ids() const = 0;
};

void write_store(std::span<const DocEmbedding> entries, std::size_t dim,
                 std::string_view encoder_tag, const std::string& path);

/// Random-access reader over a store file. Only the index is held in memory;
/// lookups read their rows with pread and may run concurrently.
class FileStore final : public EmbeddingProvider {
 public:
  ~FileStore() override;
  FileStore(const FileStore&) = delete;
  FileStore& operator=(const FileStore&) = delete;

  std::size_t dim() const override { return dim_; }
  std::string encoder_tag() const override { return tag_; }
  bool contains(std::string_view doc_id) const override;
  DocEmbedding lookup(std::string_view doc_id) const override;
  std::size_t rows(std::string_view doc_id) const override;
  std::vector<std::string> doc_ids() const override;
  std::size_t doc_count() const { return index_.size(); }

 private:
  friend std::unique_ptr<FileStore> open_store(const std::string& path);
  struct Entry {
    std::uint32_t rows;
    std::uint64_t offset;
  };
  FileStore() = default;

  int fd_ = -1;
  std::string path_;
  std::size_t dim_ = 0;
  std::string tag_;
  std::vector<std::string> order_;
  std::map<std::string, Entry, std::less<>> index_;
};

/// Throws FormatError on bad magic or a truncated file.
std::unique_ptr<FileStore> open_store(const std::string& path);

class InMemoryStore final : public EmbeddingProvider {
 public:
  InMemoryStore(std::size_t dim, std::string encoder_tag);

  void add(DocEmbedding entry);
  std::size_t dim() const override { return dim_; }
  std::string encoder_tag() const override { return tag_; }
  bool contains(std::string_view doc_id) const override;
  DocEmbedding lookup(std::string_view doc_id) const override;
  std::size_t rows(std::string_view doc_id) const override;
  std::vector<std::string> doc_ids() const override;

 private:
  std::size_t dim_;
  std::string tag_;
  std::vector<std::string> order_;
  std::map<std::string, DocEmbedding, std::less<>> entries_;
};

/// L2-normalized sum of per-token pseudo-random unit vectors. Each token's
/// vector is a Gaussian stream keyed by (hash(token), seed).
std::vector<float> hash_embed(const textprep::TokenSequence& chunk, std::size_t dim,
                              std::uint64_t seed);

/// Deterministic unit direction assigned to one class label.
std::vector<double> class_direction(std::size_t label_id, std::size_t dim, std::uint64_t seed);

/// Deterministic stand-in encoder over (a copy of) a chunked corpus. With a class
/// signal, every chunk vector of a document labelled y becomes
/// normalize(hash_embed(chunk) + epsilon * class_direction(y)).
class HashEmbedder final : public EmbeddingProvider {
 public:
  HashEmbedder(const chunker::ChunkedCorpus& corpus, std::size_t dim, std::uint64_t seed,
               std::optional<double> class_signal = std::nullopt);

  std::size_t dim() const override { return dim_; }
  std::string encoder_tag() const override;
  bool contains(std::string_view doc_id) const override;
  DocEmbedding lookup(std::string_view doc_id) const override;
  std::size_t rows(std::string_view doc_id) const override;
  std::vector<std::string> doc_ids() const override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  std::optional<double> signal_;
  std::vector<chunker::ChunkedDocument> docs_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<std::vector<double>> directions_;
};

/// Materializes every document of a provider, in doc_ids() order.
std::vector<DocEmbedding> read_all(const EmbeddingProvider& provider);

struct VerifyReport {
  std::size_t checked = 0;
  std::vector<std::string> missing;
  /// doc_id with (expected chunk count, stored row count).
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> row_mismatches;
  std::vector<std::string> non_finite;

  bool ok() const { return missing.empty() && row_mismatches.empty() && non_finite.empty(); }
  std::string summary() const;
};

/// Checks that every chunked document has an embedding with one row per
/// chunk and only finite values.
VerifyReport verify(const chunker::ChunkedCorpus& chunks, const EmbeddingProvider& provider);

}  // namespace hierdoc::embed

// SPDX-License-Identifier: Apache-2.0
#include "hierdoc/embedstore.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "hierdoc/error.hpp"
#include "hierdoc/rng.hpp"

namespace hierdoc::embed {

namespace {

template <typename UInt>
void put_le(std::string& out, UInt v) {
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

template <typename UInt>
UInt get_le(const unsigned char* p) {
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(p[i]) << (8 * i);
  return v;
}

void read_exact(int fd, void* buf, std::size_t n, std::uint64_t offset, const std::string& path) {
  auto* dst = static_cast<char*>(buf);
  while (n > 0) {
    const ssize_t got = ::pread(fd, dst, n, static_cast<off_t>(offset));
    if (got <= 0) throw FormatError("embedding store " + path + ": truncated file");
    dst += got;
    n -= static_cast<std::size_t>(got);
    offset += static_cast<std::uint64_t>(got);
  }
}

void check_finite(const DocEmbedding& e) {
  for (float v : e.values) {
    if (!std::isfinite(v)) throw FormatError("embedding for " + e.doc_id + " has non-finite values");
  }
}

void normalize(std::vector<double>& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) return;
  for (double& x : v) x /= norm;
}

}  // namespace

void write_store(std::span<const DocEmbedding> entries, std::size_t dim,
                 std::string_view encoder_tag, const std::string& path) {
  if (dim == 0 || dim > UINT32_MAX) throw Error("write_store: invalid dim");
  if (encoder_tag.size() > kTagSize) throw Error("write_store: encoder tag longer than 32 bytes");
  std::set<std::string_view> ids;
  std::uint64_t index_bytes = 0;
  for (const auto& e : entries) {
    if (e.dim != dim) {
      throw Error("write_store: " + e.doc_id + " has dim " + std::to_string(e.dim) +
                  ", store dim is " + std::to_string(dim));
    }
    if (e.rows == 0 || e.values.size() != e.rows * e.dim) {
      throw Error("write_store: " + e.doc_id + " has an inconsistent matrix");
    }
    if (e.doc_id.empty() || e.doc_id.size() > UINT16_MAX) throw Error("write_store: bad doc_id length");
    if (!ids.insert(e.doc_id).second) throw Error("write_store: duplicate doc_id " + e.doc_id);
    check_finite(e);
    index_bytes += 2 + e.doc_id.size() + 4 + 8;
  }

  std::string head;
  head.append(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(head, static_cast<std::uint32_t>(dim));
  put_le<std::uint64_t>(head, entries.size());
  std::string tag(encoder_tag);
  tag.resize(kTagSize, '\0');
  head += tag;

  std::uint64_t offset = kHeaderSize + index_bytes;
  for (const auto& e : entries) {
    put_le<std::uint16_t>(head, static_cast<std::uint16_t>(e.doc_id.size()));
    head += e.doc_id;
    put_le<std::uint32_t>(head, static_cast<std::uint32_t>(e.rows));
    put_le<std::uint64_t>(head, offset);
    offset += static_cast<std::uint64_t>(e.values.size()) * 4;
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("write_store: cannot open " + path);
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  std::string buf;
  for (const auto& e : entries) {
    buf.clear();
    buf.reserve(e.values.size() * 4);
    for (float v : e.values) put_le<std::uint32_t>(buf, std::bit_cast<std::uint32_t>(v));
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  out.flush();
  if (!out) throw Error("write_store: write failed for " + path);
}

FileStore::~FileStore() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<FileStore> open_store(const std::string& path) {
  std::unique_ptr<FileStore> store(new FileStore());
  store->path_ = path;
  store->fd_ = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
  if (store->fd_ < 0) throw FormatError("cannot open embedding store " + path);
  struct stat st {};
  if (::fstat(store->fd_, &st) != 0) throw FormatError("cannot stat " + path);
  const auto file_size = static_cast<std::uint64_t>(st.st_size);

  std::array<unsigned char, kHeaderSize> header{};
  read_exact(store->fd_, header.data(), header.size(), 0, path);
  if (std::memcmp(header.data(), kMagic.data(), kMagic.size()) != 0) {
    throw FormatError("embedding store " + path + ": bad magic");
  }
  store->dim_ = get_le<std::uint32_t>(header.data() + 8);
  const auto doc_count = get_le<std::uint64_t>(header.data() + 12);
  if (store->dim_ == 0) throw FormatError("embedding store " + path + ": dim is zero");
  const char* tag = reinterpret_cast<const char*>(header.data() + 20);
  store->tag_.assign(tag, strnlen(tag, kTagSize));

  std::uint64_t pos = kHeaderSize;
  std::uint64_t payload_end = 0;
  for (std::uint64_t i = 0; i < doc_count; ++i) {
    unsigned char len_buf[2];
    read_exact(store->fd_, len_buf, 2, pos, path);
    const auto id_len = get_le<std::uint16_t>(len_buf);
    std::string id(id_len, '\0');
    read_exact(store->fd_, id.data(), id_len, pos + 2, path);
    unsigned char tail[12];
    read_exact(store->fd_, tail, 12, pos + 2 + id_len, path);
    FileStore::Entry entry{get_le<std::uint32_t>(tail), get_le<std::uint64_t>(tail + 4)};
    pos += 2 + id_len + 12;
    const std::uint64_t end = entry.offset + std::uint64_t{entry.rows} * store->dim_ * 4;
    if (end > file_size) throw FormatError("embedding store " + path + ": truncated file");
    payload_end = std::max(payload_end, end);
    if (!store->index_.emplace(id, entry).second) {
      throw FormatError("embedding store " + path + ": duplicate doc_id " + id);
    }
    store->order_.push_back(std::move(id));
  }
  if (pos > file_size) throw FormatError("embedding store " + path + ": truncated file");
  return store;
}

bool FileStore::contains(std::string_view doc_id) const { return index_.find(doc_id) != index_.end(); }

std::size_t FileStore::rows(std::string_view doc_id) const {
  auto it = index_.find(doc_id);
  if (it == index_.end()) throw NotFoundError("doc_id not found in store: " + std::string(doc_id));
  return it->second.rows;
}

DocEmbedding FileStore::lookup(std::string_view doc_id) const {
  auto it = index_.find(doc_id);
  if (it == index_.end()) throw NotFoundError("doc_id not found in store: " + std::string(doc_id));
  DocEmbedding e{std::string(doc_id), it->second.rows, dim_, {}};
  const std::size_t n = e.rows * dim_;
  std::vector<unsigned char> raw(n * 4);
  read_exact(fd_, raw.data(), raw.size(), it->second.offset, path_);
  e.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    e.values[i] = std::bit_cast<float>(get_le<std::uint32_t>(raw.data() + 4 * i));
  }
  return e;
}

std::vector<std::string> FileStore::doc_ids() const { return order_; }

InMemoryStore::InMemoryStore(std::size_t dim, std::string encoder_tag)
    : dim_(dim), tag_(std::move(encoder_tag)) {
  if (dim_ == 0) throw Error("InMemoryStore: dim must be positive");
}

void InMemoryStore::add(DocEmbedding entry) {
  if (entry.dim != dim_ || entry.rows == 0 || entry.values.size() != entry.rows * entry.dim) {
    throw Error("InMemoryStore: entry " + entry.doc_id + " does not match store dim");
  }
  check_finite(entry);
  const std::string id = entry.doc_id;
  if (!entries_.emplace(id, std::move(entry)).second) {
    throw Error("InMemoryStore: duplicate doc_id " + id);
  }
  order_.push_back(id);
}

bool InMemoryStore::contains(std::string_view doc_id) const {
  return entries_.find(doc_id) != entries_.end();
}

DocEmbedding InMemoryStore::lookup(std::string_view doc_id) const {
  auto it = entries_.find(doc_id);
  if (it == entries_.end()) throw NotFoundError("doc_id not found: " + std::string(doc_id));
  return it->second;
}

std::size_t InMemoryStore::rows(std::string_view doc_id) const { return lookup(doc_id).rows; }

std::vector<std::string> InMemoryStore::doc_ids() const { return order_; }

std::vector<float> hash_embed(const textprep::TokenSequence& chunk, std::size_t dim,
                              std::uint64_t seed) {
  if (chunk.empty()) throw Error("hash_embed: empty chunk");
  if (dim < 8) throw Error("hash_embed: dim must be >= 8");
  std::vector<double> sum(dim, 0.0);
  std::vector<double> token_vec(dim);
  const std::uint64_t seed_key = splitmix64(seed ^ 0xA0761D6478BD642FULL);
  for (const auto& token : chunk) {
    CounterRng rng(splitmix64(fnv1a64(token) ^ seed_key));
    for (auto& x : token_vec) x = rng.normal();
    normalize(token_vec);
    for (std::size_t i = 0; i < dim; ++i) sum[i] += token_vec[i];
  }
  normalize(sum);
  return {sum.begin(), sum.end()};
}

std::vector<double> class_direction(std::size_t label_id, std::size_t dim, std::uint64_t seed) {
  CounterRng rng = CounterRng(seed, "class-signal").derive(label_id);
  std::vector<double> dir(dim);
  for (auto& x : dir) x = rng.normal();
  normalize(dir);
  return dir;
}

HashEmbedder::HashEmbedder(const chunker::ChunkedCorpus& corpus, std::size_t dim, std::uint64_t seed,
                           std::optional<double> class_signal)
    : dim_(dim), seed_(seed), signal_(class_signal), docs_(corpus.documents) {
  if (dim_ < 8) throw Error("HashEmbedder: dim must be >= 8");
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    if (!index_.emplace(docs_[i].doc_id, i).second) {
      throw Error("HashEmbedder: duplicate doc_id " + docs_[i].doc_id);
    }
  }
  if (signal_) {
    for (std::size_t c = 0; c < corpus.manifest.num_classes; ++c) {
      directions_.push_back(class_direction(c, dim_, seed_));
    }
  }
}

std::string HashEmbedder::encoder_tag() const {
  return signal_ ? "hash-signal-" + std::to_string(dim_) : "hash-" + std::to_string(dim_);
}

bool HashEmbedder::contains(std::string_view doc_id) const { return index_.find(doc_id) != index_.end(); }

std::size_t HashEmbedder::rows(std::string_view doc_id) const {
  auto it = index_.find(doc_id);
  if (it == index_.end()) throw NotFoundError("doc_id not found: " + std::string(doc_id));
  return docs_[it->second].chunks.size();
}

DocEmbedding HashEmbedder::lookup(std::string_view doc_id) const {
  auto it = index_.find(doc_id);
  if (it == index_.end()) throw NotFoundError("doc_id not found: " + std::string(doc_id));
  const auto& doc = docs_[it->second];
  DocEmbedding e{doc.doc_id, doc.chunks.size(), dim_, {}};
  e.values.reserve(e.rows * dim_);
  for (const auto& chunk : doc.chunks) {
    auto v = hash_embed(chunk, dim_, seed_);
    if (signal_) {
      const auto& dir = directions_.at(doc.label_id);
      std::vector<double> mixed(dim_);
      for (std::size_t i = 0; i < dim_; ++i) mixed[i] = v[i] + *signal_ * dir[i];
      normalize(mixed);
      std::copy(mixed.begin(), mixed.end(), v.begin());
    }
    e.values.insert(e.values.end(), v.begin(), v.end());
  }
  return e;
}

std::vector<std::string> HashEmbedder::doc_ids() const {
  std::vector<std::string> ids;
  ids.reserve(docs_.size());
  for (const auto& d : docs_) ids.push_back(d.doc_id);
  return ids;
}

std::vector<DocEmbedding> read_all(const EmbeddingProvider& provider) {
  std::vector<DocEmbedding> out;
  for (const auto& id : provider.doc_ids()) out.push_back(provider.lookup(id));
  return out;
}

std::string VerifyReport::summary() const {
  std::ostringstream s;
  s << "checked " << checked << " documents: " << missing.size() << " missing, "
    << row_mismatches.size() << " row-count mismatches, " << non_finite.size() << " non-finite";
  for (const auto& id : missing) s << "\n  missing: " << id;
  for (const auto& [id, counts] : row_mismatches) {
    s << "\n  rows: " << id << " expected " << counts.first << " found " << counts.second;
  }
  for (const auto& id : non_finite) s << "\n  non-finite: " << id;
  return s.str();
}

VerifyReport verify(const chunker::ChunkedCorpus& chunks, const EmbeddingProvider& provider) {
  VerifyReport report;
  for (const auto& doc : chunks.documents) {
    ++report.checked;
    if (!provider.contains(doc.doc_id)) {
      report.missing.push_back(doc.doc_id);
      continue;
    }
    const auto e = provider.lookup(doc.doc_id);
    if (e.rows != doc.chunks.size()) {
      report.row_mismatches.push_back({doc.doc_id, {doc.chunks.size(), e.rows}});
    }
    if (!std::all_of(e.values.begin(), e.values.end(), [](float v) { return std::isfinite(v); })) {
      report.non_finite.push_back(doc.doc_id);
    }
  }
  return report;
}

}  // namespace hierdoc::embed

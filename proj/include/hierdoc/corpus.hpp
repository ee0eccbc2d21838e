// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hierdoc::corpus {

enum class Split { train, test, unsplit };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct LabeledDocument {
  std::string doc_id;
  std::string raw_text;
  std::size_t label_id = 0;
  Split split = Split::unsplit;

  bool operator==(const LabeledDocument&) const = default;
};

/// Static description of one benchmark dataset. Class names are kept in
/// alphabetical order; a document's label_id is its index in that list.
struct DatasetManifest {
  std::string name;
  std::size_t num_classes = 0;
  std::vector<std::string> class_names;
  std::size_t avg_words = 0;
  std::size_t default_chunk_size = 50;
  bool canonical_split = false;
  std::optional<std::size_t> train_count;
  std::optional<std::size_t> test_count;
  std::string notes;

  /// Throws FormatError when an invariant does not hold.
  void validate() const;
  std::size_t label_of(std::string_view class_name) const;

  bool operator==(const DatasetManifest&) const = default;
};

DatasetManifest load_manifest(const std::string& path);
DatasetManifest manifest_from_json(std::string_view json_text);
std::string manifest_to_json(const DatasetManifest& manifest);

struct Corpus {
  DatasetManifest manifest;
  std::vector<LabeledDocument> documents;

  std::size_t count(Split split) const;
  bool operator==(const Corpus&) const = default;
};

/// Loads the canonical `doc_id,split,label,text` CSV. The label column holds
/// class names, mapped through the manifest.
Corpus load_dataset(const DatasetManifest& manifest, const std::string& path);
Corpus parse_dataset(const DatasetManifest& manifest, std::string_view csv_text);

void write_dataset(const Corpus& corpus, const std::string& path);
std::string serialize_dataset(const Corpus& corpus);

/// Per-class proportional train/test assignment. The overall train size is
/// round(train_fraction * N); each class receives floor or ceil of its exact
/// share (largest remainder), so per-class counts are within one document of
/// train_fraction * class_count.
Corpus stratified_split(const Corpus& corpus, double train_fraction, std::uint64_t seed);

/// Checks the per-split counts against manifest.train_count/test_count.
void check_split_counts(const Corpus& corpus);

struct CorpusStats {
  double avg_words = 0.0;
  std::vector<std::size_t> class_histogram;
  std::size_t max_words = 0;
};

CorpusStats corpus_stats(const Corpus& corpus);

/// Number of whitespace-separated tokens.
std::size_t count_words(std::string_view text);

}  // namespace hierdoc::corpus

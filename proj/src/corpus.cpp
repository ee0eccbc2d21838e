// SPDX-License-Identifier: Apache-2.0
#include "hierdoc/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hierdoc/csv.hpp"
#include "hierdoc/error.hpp"
#include "hierdoc/rng.hpp"

namespace hierdoc::corpus {

namespace {

bool is_blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); });
}

const std::vector<std::string>& expected_header() {
  static const std::vector<std::string> header{"doc_id", "split", "label", "text"};
  return header;
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::unsplit: return "unsplit";
  }
  return "unsplit";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "test") return Split::test;
  if (text == "unsplit") return Split::unsplit;
  throw FormatError("unknown split '" + std::string(text) + "'");
}

void DatasetManifest::validate() const {
  if (name.empty()) throw FormatError("manifest: empty name");
  if (num_classes == 0) throw FormatError("manifest " + name + ": num_classes must be positive");
  if (class_names.size() != num_classes) {
    throw FormatError("manifest " + name + ": class_names has " +
                      std::to_string(class_names.size()) + " entries, expected " +
                      std::to_string(num_classes));
  }
  if (!std::is_sorted(class_names.begin(), class_names.end()) ||
      std::adjacent_find(class_names.begin(), class_names.end()) != class_names.end()) {
    throw FormatError("manifest " + name + ": class_names must be unique and alphabetical");
  }
  if (avg_words == 0) throw FormatError("manifest " + name + ": avg_words must be positive");
  if (default_chunk_size < 20 || default_chunk_size > 50) {
    throw FormatError("manifest " + name + ": default_chunk_size outside [20, 50]");
  }
}

std::size_t DatasetManifest::label_of(std::string_view class_name) const {
  auto it = std::lower_bound(class_names.begin(), class_names.end(), class_name);
  if (it == class_names.end() || *it != class_name) {
    throw NotFoundError("unknown class name '" + std::string(class_name) + "' for dataset " + name);
  }
  return static_cast<std::size_t>(it - class_names.begin());
}

DatasetManifest manifest_from_json(std::string_view json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  DatasetManifest m;
  try {
    m.name = j.at("name").get<std::string>();
    m.num_classes = j.at("num_classes").get<std::size_t>();
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    m.avg_words = j.at("avg_words").get<std::size_t>();
    m.default_chunk_size = j.at("default_chunk_size").get<std::size_t>();
    m.canonical_split = j.at("canonical_split").get<bool>();
    if (j.contains("train_count") && !j["train_count"].is_null()) {
      m.train_count = j["train_count"].get<std::size_t>();
    }
    if (j.contains("test_count") && !j["test_count"].is_null()) {
      m.test_count = j["test_count"].get<std::size_t>();
    }
    m.notes = j.value("notes", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  std::sort(m.class_names.begin(), m.class_names.end());
  m.validate();
  return m;
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return manifest_from_json(buf.str());
}

std::string manifest_to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["name"] = m.name;
  j["num_classes"] = m.num_classes;
  j["class_names"] = m.class_names;
  j["avg_words"] = m.avg_words;
  j["default_chunk_size"] = m.default_chunk_size;
  j["canonical_split"] = m.canonical_split;
  j["train_count"] = m.train_count ? nlohmann::json(*m.train_count) : nlohmann::json();
  j["test_count"] = m.test_count ? nlohmann::json(*m.test_count) : nlohmann::json();
  if (!m.notes.empty()) j["notes"] = m.notes;
  return j.dump(2);
}

std::size_t Corpus::count(Split split) const {
  return static_cast<std::size_t>(std::count_if(
      documents.begin(), documents.end(), [split](const auto& d) { return d.split == split; }));
}

Corpus parse_dataset(const DatasetManifest& manifest, std::string_view csv_text) {
  manifest.validate();
  const auto rows = csv::parse(csv_text);
  if (rows.empty()) throw FormatError("dataset " + manifest.name + ": no records");
  if (rows.front() != expected_header()) {
    throw FormatError("dataset " + manifest.name + ": header must be doc_id,split,label,text");
  }
  if (rows.size() == 1) throw FormatError("dataset " + manifest.name + ": no records");

  Corpus corpus{manifest, {}};
  corpus.documents.reserve(rows.size() - 1);
  std::set<std::string, std::less<>> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = "dataset " + manifest.name + " record " + std::to_string(r);
    if (row.size() != 4) {
      throw FormatError(where + ": expected 4 columns, found " + std::to_string(row.size()));
    }
    LabeledDocument doc;
    doc.doc_id = row[0];
    if (doc.doc_id.empty()) throw FormatError(where + ": empty doc_id");
    if (!seen.insert(doc.doc_id).second) throw FormatError(where + ": duplicate doc_id " + doc.doc_id);
    doc.split = parse_split(row[1]);
    doc.label_id = manifest.label_of(row[2]);
    doc.raw_text = row[3];
    if (is_blank(doc.raw_text)) throw FormatError(where + ": empty text for " + doc.doc_id);
    corpus.documents.push_back(std::move(doc));
  }

  if (manifest.canonical_split) {
    check_split_counts(corpus);
  } else if (manifest.train_count && manifest.test_count &&
             corpus.documents.size() != *manifest.train_count + *manifest.test_count) {
    throw FormatError("dataset " + manifest.name + ": found " +
                      std::to_string(corpus.documents.size()) + " records, manifest expects " +
                      std::to_string(*manifest.train_count + *manifest.test_count));
  }
  return corpus;
}

Corpus load_dataset(const DatasetManifest& manifest, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open dataset file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(manifest, buf.str());
}

std::string serialize_dataset(const Corpus& corpus) {
  std::ostringstream out;
  csv::write_row(out, expected_header());
  for (const auto& d : corpus.documents) {
    csv::write_row(out, {d.doc_id, std::string(to_string(d.split)),
                         corpus.manifest.class_names.at(d.label_id), d.raw_text});
  }
  return out.str();
}

void write_dataset(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << serialize_dataset(corpus);
  if (!out) throw Error("write failed for " + path);
}

void check_split_counts(const Corpus& corpus) {
  const auto& m = corpus.manifest;
  const std::size_t n_train = corpus.count(Split::train);
  const std::size_t n_test = corpus.count(Split::test);
  if (m.train_count && n_train != *m.train_count) {
    throw FormatError("dataset " + m.name + ": " + std::to_string(n_train) +
                      " train records, manifest expects " + std::to_string(*m.train_count));
  }
  if (m.test_count && n_test != *m.test_count) {
    throw FormatError("dataset " + m.name + ": " + std::to_string(n_test) +
                      " test records, manifest expects " + std::to_string(*m.test_count));
  }
}

Corpus stratified_split(const Corpus& corpus, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error("stratified_split: train_fraction must be in (0, 1)");
  }
  const std::size_t k = corpus.manifest.num_classes;
  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    const auto& d = corpus.documents[i];
    if (d.split == Split::test) throw Error("stratified_split: corpus already has a test split");
    by_class.at(d.label_id).push_back(i);
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (!by_class[c].empty() && by_class[c].size() < 2) {
      throw Error("stratified_split: class '" + corpus.manifest.class_names[c] +
                  "' has fewer than 2 documents");
    }
  }

  // Largest-remainder apportionment of round(f * N) train slots.
  const std::size_t n = corpus.documents.size();
  const auto target = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  std::vector<std::size_t> quota(k);
  std::vector<double> remainder(k);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const double exact = train_fraction * static_cast<double>(by_class[c].size());
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    remainder[c] = exact - static_cast<double>(quota[c]);
    assigned += quota[c];
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < target && i < k; ++i) {
    if (remainder[order[i]] > 0.0) {
      ++quota[order[i]];
      ++assigned;
    }
  }

  Corpus out = corpus;
  for (std::size_t c = 0; c < k; ++c) {
    CounterRng rng(seed, "stratified_split");
    rng = rng.derive(c);
    auto members = by_class[c];
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t j = 0; j < members.size(); ++j) {
      out.documents[members[j]].split = j < quota[c] ? Split::train : Split::test;
    }
  }
  return out;
}

std::size_t count_words(std::string_view text) {
  std::size_t words = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    const bool space = std::isspace(c) != 0;
    if (!space && !in_word) ++words;
    in_word = !space;
  }
  return words;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  if (corpus.documents.empty()) throw Error("corpus_stats: empty corpus");
  CorpusStats stats;
  stats.class_histogram.assign(corpus.manifest.num_classes, 0);
  std::size_t total = 0;
  for (const auto& d : corpus.documents) {
    const std::size_t w = count_words(d.raw_text);
    total += w;
    stats.max_words = std::max(stats.max_words, w);
    ++stats.class_histogram.at(d.label_id);
  }
  stats.avg_words = static_cast<double>(total) / static_cast<double>(corpus.documents.size());
  return stats;
}

}  // namespace hierdoc::corpus

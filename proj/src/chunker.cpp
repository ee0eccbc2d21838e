// SPDX-License-Identifier: Apache-2.0
#include "hierdoc/chunker.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>

#include <json.hpp>

#include "hierdoc/error.hpp"

namespace hierdoc::chunker {

std::size_t ChunkedDocument::token_count() const {
  std::size_t n = 0;
  for (const auto& c : chunks) n += c.size();
  return n;
}

ChunkedDocument chunk(const textprep::TokenSequence& tokens, std::size_t chunk_size,
                      std::size_t max_chunks) {
  if (tokens.empty()) throw Error("chunk: empty token sequence");
  if (chunk_size == 0) throw Error("chunk: chunk_size must be >= 1");
  if (max_chunks == 0) throw Error("chunk: max_chunks must be >= 1");

  ChunkedDocument doc;
  doc.chunk_size = chunk_size;
  const std::size_t limit = std::min(tokens.size(), chunk_size * max_chunks);
  doc.truncated = tokens.size() > limit;
  doc.chunks.reserve((limit + chunk_size - 1) / chunk_size);
  for (std::size_t start = 0; start < limit; start += chunk_size) {
    const std::size_t end = std::min(start + chunk_size, limit);
    doc.chunks.emplace_back(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                            tokens.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return doc;
}

std::size_t choose_chunk_size(double avg_words) {
  if (!(avg_words > 0.0)) throw Error("choose_chunk_size: avg_words must be positive");
  return avg_words < 100.0 ? 20 : 50;
}

ChunkedCorpus chunk_corpus(const corpus::Corpus& corpus, std::size_t chunk_size,
                           std::size_t max_chunks, std::vector<std::string>* dropped) {
  ChunkedCorpus out{corpus.manifest, {}};
  out.documents.reserve(corpus.documents.size());
  for (const auto& d : corpus.documents) {
    const auto tokens = textprep::tokenize(textprep::preprocess(d.raw_text));
    if (tokens.empty()) {
      std::cerr << "warning: document " << d.doc_id << " is empty after preprocessing; dropped\n";
      if (dropped) dropped->push_back(d.doc_id);
      continue;
    }
    auto c = chunk(tokens, chunk_size, max_chunks);
    c.doc_id = d.doc_id;
    c.label_id = d.label_id;
    c.split = d.split;
    out.documents.push_back(std::move(c));
  }
  return out;
}

void write_jsonl(std::ostream& out, const ChunkedCorpus& chunks) {
  for (const auto& d : chunks.documents) {
    nlohmann::ordered_json j;
    j["doc_id"] = d.doc_id;
    j["label"] = chunks.manifest.class_names.at(d.label_id);
    j["split"] = std::string(corpus::to_string(d.split));
    j["chunks"] = d.chunks;
    j["truncated"] = d.truncated;
    out << j.dump() << '\n';
  }
}

void write_jsonl(const std::string& path, const ChunkedCorpus& chunks) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write_jsonl(out, chunks);
  if (!out) throw Error("write failed for " + path);
}

ChunkedCorpus read_jsonl(const std::string& path, const corpus::DatasetManifest* manifest) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);

  struct Raw {
    ChunkedDocument doc;
    std::string label;
  };
  std::vector<Raw> raws;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Raw r;
      r.doc.doc_id = j.at("doc_id").get<std::string>();
      r.label = j.at("label").get<std::string>();
      r.doc.split = corpus::parse_split(j.at("split").get<std::string>());
      r.doc.chunks = j.at("chunks").get<std::vector<textprep::TokenSequence>>();
      r.doc.truncated = j.value("truncated", false);
      if (r.doc.chunks.empty()) throw FormatError("document has no chunks");
      for (const auto& c : r.doc.chunks) {
        if (c.empty()) throw FormatError("empty chunk");
        r.doc.chunk_size = std::max(r.doc.chunk_size, c.size());
      }
      raws.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }

  ChunkedCorpus out;
  if (manifest) {
    out.manifest = *manifest;
  } else {
    std::set<std::string> names;
    for (const auto& r : raws) names.insert(r.label);
    out.manifest.name = path;
    out.manifest.class_names.assign(names.begin(), names.end());
    out.manifest.num_classes = names.size();
  }
  out.documents.reserve(raws.size());
  for (auto& r : raws) {
    r.doc.label_id = out.manifest.label_of(r.label);
    out.documents.push_back(std::move(r.doc));
  }
  return out;
}

}  // namespace hierdoc::chunker

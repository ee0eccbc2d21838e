// SPDX-License-Identifier: Apache-2.0
#include "hierdoc/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

#include "hierdoc/corpus.hpp"
#include "hierdoc/error.hpp"

namespace hierdoc::harness {

namespace {

std::string resolve(const std::string& base_dir, const std::string& path) {
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j, const std::string& base_dir) {
  ExperimentConfig c;
  c.train = TrainConfig::from_json(j);
  try {
    c.manifest_path = resolve(base_dir, j.at("manifest").get<std::string>());
    c.corpus_path = resolve(base_dir, j.at("corpus").get<std::string>());
    if (j.contains("store")) c.store_path = resolve(base_dir, j["store"].get<std::string>());
    if (j.contains("embedder")) {
      const auto& e = j["embedder"];
      HashEmbedderSpec h;
      h.dim = e.value("dim", h.dim);
      h.seed = e.value("seed", h.seed);
      if (e.contains("class_signal")) h.class_signal = e["class_signal"].get<double>();
      c.embedder = h;
    }
    if (j.contains("artifacts_dir")) c.artifacts_dir = resolve(base_dir, j["artifacts_dir"].get<std::string>());
    c.split_fraction = j.value("split_fraction", c.split_fraction);
    c.split_seed = j.value("split_seed", c.split_seed);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("run config: ") + e.what());
  }
  if (c.store_path.has_value() == c.embedder.has_value()) {
    throw FormatError("run config: exactly one of \"store\" and \"embedder\" is required");
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  const auto dir = std::filesystem::path(path).parent_path().string();
  return from_json(j, dir.empty() ? "." : dir);
}

PreparedData prepare(const ExperimentConfig& config) {
  const auto manifest = corpus::load_manifest(config.manifest_path);
  auto data = corpus::load_dataset(manifest, config.corpus_path);
  if (data.count(corpus::Split::unsplit) > 0) {
    data = corpus::stratified_split(data, config.split_fraction, config.split_seed);
    corpus::check_split_counts(data);
  }

  std::size_t chunk_size = config.train.chunk_size;
  if (chunk_size == 0) chunk_size = chunker::choose_chunk_size(corpus::corpus_stats(data).avg_words);

  PreparedData out;
  out.chunks = chunker::chunk_corpus(data, chunk_size, config.train.max_chunks, &out.dropped);
  if (config.store_path) {
    out.provider = embed::open_store(*config.store_path);
  } else {
    const auto& h = *config.embedder;
    out.provider = std::make_unique<embed::HashEmbedder>(out.chunks, h.dim, h.seed, h.class_signal);
  }
  const auto report = embed::verify(out.chunks, *out.provider);
  if (!report.ok()) throw FormatError("embedding provider does not match the chunked corpus: " + report.summary());
  return out;
}

TrainResult run_experiment(const ExperimentConfig& config) {
  auto data = prepare(config);
  return train(config.train, data.chunks, *data.provider, config.artifacts_dir);
}

TrainResult run_experiment(const std::string& config_path) {
  return run_experiment(ExperimentConfig::load(config_path));
}

}  // namespace hierdoc::harness

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "hierdoc/chunker.hpp"
#include "hierdoc/embedstore.hpp"
#include "hierdoc/trainer.hpp"

namespace hierdoc::harness {

/// Settings for the deterministic hash embedder used instead of a store.
struct HashEmbedderSpec {
  std::size_t dim = 512;
  std::uint64_t seed = 0;
  std::optional<double> class_signal;
};

/// run.json: the TrainConfig fields at the top level plus data locations.
/// Relative paths resolve against the config file's directory.
///
///   {"model_name": "bert_lstm", "dataset_name": "bbc_sports", ...,
///    "manifest": "manifests/bbc_sports.json", "corpus": "bbc_sports.csv",
///    "store": "bbc_sports.emb",            // or "embedder": {"dim":..,"seed":..}
///    "artifacts_dir": "runs/bert_lstm_bbc_sports",
///    "split_fraction": 0.8, "split_seed": 42}
struct ExperimentConfig {
  TrainConfig train;
  std::string manifest_path;
  std::string corpus_path;
  std::optional<std::string> store_path;
  std::optional<HashEmbedderSpec> embedder;
  std::optional<std::string> artifacts_dir;
  double split_fraction = 0.8;
  std::uint64_t split_seed = 42;

  static ExperimentConfig from_json(const nlohmann::json& j, const std::string& base_dir = ".");
  static ExperimentConfig load(const std::string& path);
};

struct PreparedData {
  chunker::ChunkedCorpus chunks;
  std::unique_ptr<embed::EmbeddingProvider> provider;
  std::vector<std::string> dropped;  // empty after preprocessing
};

/// load -> split (when the dataset has no canonical split) -> preprocess ->
/// chunk -> open or build the embedding provider -> verify.
PreparedData prepare(const ExperimentConfig& config);

TrainResult run_experiment(const ExperimentConfig& config);
TrainResult run_experiment(const std::string& config_path);

}  // namespace hierdoc::harness

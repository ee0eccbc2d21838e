// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hierdoc/chunker.hpp"
#include "hierdoc/embedstore.hpp"
#include "hierdoc/heads.hpp"
#include "hierdoc/metrics.hpp"

namespace hierdoc::harness {

/// None of these are given by the benchmark description; the defaults are
/// ordinary Adam settings.
struct TrainConfig {
  std::string model_name = "flat_mean";
  std::string dataset_name;
  std::size_t chunk_size = 0;  // 0: choose from the dataset's average length
  std::size_t max_chunks = chunker::kDefaultMaxChunks;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  double lr = 1e-3;
  std::uint64_t seed = 42;
  std::size_t early_stop_patience = 5;
  double val_fraction = 0.1;
  /// Stop as soon as eval-mode train accuracy reaches this value.
  std::optional<double> target_train_accuracy;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;       // mean per-document loss over the epoch's batches
  double train_accuracy = 0.0;   // eval mode, after the epoch
  std::optional<double> val_accuracy;
};

struct TrainReport {
  std::string model_name;
  std::string dataset_name;
  std::size_t input_dim = 0;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  std::string best_checkpoint_path;
  double wall_seconds = 0.0;
  Metrics test;
  std::vector<Prediction> test_predictions;

  nlohmann::ordered_json to_json() const;
  static TrainReport from_json(const nlohmann::json& j);
};

struct TrainResult {
  TrainReport report;
  heads::HeadModel<float> model;  // best-validation parameters
};

struct Evaluation {
  Metrics metrics;
  std::vector<Prediction> predictions;  // in the order of the input documents
};

/// Trains the configured head on the train split and evaluates the best
/// checkpoint on the test split. A stratified validation subset is held out
/// of train when val_fraction > 0. When artifacts_dir is set the config,
/// per-epoch report, metrics JSON, predictions CSV and checkpoint are
/// written there.
TrainResult train(const TrainConfig& config, const chunker::ChunkedCorpus& corpus,
                  const embed::EmbeddingProvider& provider,
                  const std::optional<std::string>& artifacts_dir = std::nullopt);

/// Eval-mode predictions (argmax, lowest index on ties) for the documents.
/// Never modifies the model.
Evaluation evaluate(heads::HeadModel<float>& model, std::span<const chunker::ChunkedDocument> documents,
                    const embed::EmbeddingProvider& provider, std::size_t batch_size = 32);

/// Documents of one split, in corpus order.
std::vector<chunker::ChunkedDocument> select_split(const chunker::ChunkedCorpus& corpus, corpus::Split split);

/// Batches of document indices: documents are shuffled with the (seed,
/// epoch) stream, stably sorted by chunk count so each batch holds similar
/// lengths, cut into batch_size groups, and the group order is shuffled.
std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> chunk_counts,
                                                   std::size_t batch_size, std::uint64_t seed,
                                                   std::size_t epoch);

}  // namespace hierdoc::harness

// SPDX-License-Identifier: Apache-2.0
#include "hierdoc/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include "hierdoc/checkpoint.hpp"
#include "hierdoc/error.hpp"
#include "hierdoc/loss.hpp"
#include "hierdoc/rng.hpp"

namespace hierdoc::harness {

using chunker::ChunkedDocument;
using embed::DocEmbedding;
using nn::Tensor;

void TrainConfig::validate() const {
  heads::required_input_dim(model_name);  // throws for unknown names
  if (batch_size < 1) throw Error("config: batch_size must be >= 1");
  if (epochs < 1) throw Error("config: epochs must be >= 1");
  if (!(lr > 0.0)) throw Error("config: lr must be positive");
  if (!(val_fraction >= 0.0 && val_fraction < 0.5)) throw Error("config: val_fraction must be in [0, 0.5)");
  if (max_chunks < 1) throw Error("config: max_chunks must be >= 1");
}

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["model_name"] = model_name;
  j["dataset_name"] = dataset_name;
  j["chunk_size"] = chunk_size;
  j["max_chunks"] = max_chunks;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["lr"] = lr;
  j["seed"] = seed;
  j["early_stop_patience"] = early_stop_patience;
  j["val_fraction"] = val_fraction;
  if (target_train_accuracy) j["target_train_accuracy"] = *target_train_accuracy;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.model_name = j.at("model_name").get<std::string>();
    c.dataset_name = j.value("dataset_name", c.dataset_name);
    c.chunk_size = j.value("chunk_size", c.chunk_size);
    c.max_chunks = j.value("max_chunks", c.max_chunks);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.lr = j.value("lr", c.lr);
    c.seed = j.value("seed", c.seed);
    c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
    c.val_fraction = j.value("val_fraction", c.val_fraction);
    if (j.contains("target_train_accuracy")) c.target_train_accuracy = j["target_train_accuracy"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::ordered_json TrainReport::to_json() const {
  nlohmann::ordered_json j;
  j["model_name"] = model_name;
  j["dataset_name"] = dataset_name;
  j["input_dim"] = input_dim;
  j["epochs"] = nlohmann::ordered_json::array();
  for (const auto& e : epochs) {
    nlohmann::ordered_json r;
    r["epoch"] = e.epoch;
    r["train_loss"] = e.train_loss;
    r["train_accuracy"] = e.train_accuracy;
    r["val_accuracy"] = e.val_accuracy ? nlohmann::ordered_json(*e.val_accuracy) : nlohmann::ordered_json();
    j["epochs"].push_back(r);
  }
  j["best_epoch"] = best_epoch;
  j["best_checkpoint_path"] = best_checkpoint_path;
  j["wall_seconds"] = wall_seconds;
  j["test_accuracy"] = test.accuracy;
  j["test_loss"] = test.loss;
  return j;
}

TrainReport TrainReport::from_json(const nlohmann::json& j) {
  TrainReport r;
  r.model_name = j.at("model_name").get<std::string>();
  r.dataset_name = j.at("dataset_name").get<std::string>();
  r.input_dim = j.value("input_dim", std::size_t{0});
  for (const auto& e : j.value("epochs", nlohmann::json::array())) {
    EpochRecord rec;
    rec.epoch = e.at("epoch").get<std::size_t>();
    rec.train_loss = e.at("train_loss").get<double>();
    rec.train_accuracy = e.at("train_accuracy").get<double>();
    if (!e.at("val_accuracy").is_null()) rec.val_accuracy = e["val_accuracy"].get<double>();
    r.epochs.push_back(rec);
  }
  r.best_epoch = j.value("best_epoch", std::size_t{0});
  r.best_checkpoint_path = j.value("best_checkpoint_path", std::string{});
  r.wall_seconds = j.value("wall_seconds", 0.0);
  r.test.accuracy = j.at("test_accuracy").get<double>();
  r.test.loss = j.value("test_loss", 0.0);
  return r;
}

std::vector<ChunkedDocument> select_split(const chunker::ChunkedCorpus& corpus, corpus::Split split) {
  std::vector<ChunkedDocument> out;
  for (const auto& d : corpus.documents) {
    if (d.split == split) out.push_back(d);
  }
  return out;
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> chunk_counts,
                                                   std::size_t batch_size, std::uint64_t seed, std::size_t epoch) {
  if (batch_size == 0) throw Error("make_batches: batch_size must be >= 1");
  CounterRng rng = CounterRng(seed, "shuffle").derive(epoch);
  std::vector<std::size_t> order(chunk_counts.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return chunk_counts[a] < chunk_counts[b]; });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  rng.shuffle(std::span<std::vector<std::size_t>>(batches));
  return batches;
}

namespace {

struct PaddedBatch {
  Tensor<float> values;
  std::vector<std::size_t> lengths;
  std::vector<std::size_t> labels;
};

PaddedBatch assemble(std::span<const DocEmbedding> embeddings, std::span<const ChunkedDocument> docs,
                     std::span<const std::size_t> members) {
  const std::size_t dim = embeddings[members.front()].dim;
  std::size_t t_max = 0;
  for (auto i : members) t_max = std::max(t_max, embeddings[i].rows);
  PaddedBatch b{Tensor<float>({members.size(), t_max, dim}), {}, {}};
  for (std::size_t r = 0; r < members.size(); ++r) {
    const auto& e = embeddings[members[r]];
    std::copy(e.values.begin(), e.values.end(), b.values.data() + r * t_max * dim);
    b.lengths.push_back(e.rows);
    b.labels.push_back(docs[members[r]].label_id);
  }
  return b;
}

std::vector<DocEmbedding> load_embeddings(std::span<const ChunkedDocument> docs,
                                          const embed::EmbeddingProvider& provider) {
  std::vector<DocEmbedding> out;
  out.reserve(docs.size());
  for (const auto& d : docs) {
    if (!provider.contains(d.doc_id)) throw NotFoundError("no embedding for document " + d.doc_id);
    auto e = provider.lookup(d.doc_id);
    if (e.rows != d.chunks.size()) {
      throw FormatError("embedding for " + d.doc_id + " has " + std::to_string(e.rows) + " rows, document has " +
                        std::to_string(d.chunks.size()) + " chunks");
    }
    out.push_back(std::move(e));
  }
  return out;
}

Evaluation evaluate_cached(heads::HeadModel<float>& model, std::span<const ChunkedDocument> docs,
                           std::span<const DocEmbedding> embeddings, std::size_t batch_size) {
  Evaluation ev;
  ev.predictions.resize(docs.size());
  if (docs.empty()) {
    ev.metrics = compute_metrics({}, model.num_classes(), 0.0);
    return ev;
  }
  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return embeddings[a].rows < embeddings[b].rows; });
  double loss_sum = 0.0;
  const nn::ForwardContext ctx{nn::Mode::eval, 0, 0};
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    const std::span<const std::size_t> members(order.data() + start, end - start);
    const auto batch = assemble(embeddings, docs, members);
    const Tensor<float> logits = model.forward(batch.values, batch.lengths, ctx);
    const auto loss = nn::softmax_crossentropy(logits, batch.labels);
    loss_sum += static_cast<double>(loss.loss) * static_cast<double>(members.size());
    const Tensor<float> probs = nn::softmax(logits);
    for (std::size_t r = 0; r < members.size(); ++r) {
      const std::size_t pred = nn::argmax_row(logits, r);
      ev.predictions[members[r]] = {docs[members[r]].doc_id, batch.labels[r], pred,
                                    static_cast<double>(probs.at(r, pred))};
    }
  }
  ev.metrics = compute_metrics(ev.predictions, model.num_classes(), loss_sum / static_cast<double>(docs.size()));
  return ev;
}

// Per-class hold-out of round(fraction * n_c) documents, keeping at least
// one training document per class.
void split_validation(const std::vector<ChunkedDocument>& pool, std::size_t num_classes, double fraction,
                      std::uint64_t seed, std::vector<ChunkedDocument>& train_out,
                      std::vector<ChunkedDocument>& val_out) {
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < pool.size(); ++i) by_class.at(pool[i].label_id).push_back(i);
  std::vector<bool> is_val(pool.size(), false);
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto members = by_class[c];
    CounterRng rng = CounterRng(seed, "validation_split").derive(c);
    rng.shuffle(std::span<std::size_t>(members));
    auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    if (!members.empty()) n_val = std::min(n_val, members.size() - 1);
    for (std::size_t j = 0; j < n_val; ++j) is_val[members[j]] = true;
  }
  for (std::size_t i = 0; i < pool.size(); ++i) (is_val[i] ? val_out : train_out).push_back(pool[i]);
}

}  // namespace

Evaluation evaluate(heads::HeadModel<float>& model, std::span<const ChunkedDocument> documents,
                    const embed::EmbeddingProvider& provider, std::size_t batch_size) {
  if (batch_size == 0) throw Error("evaluate: batch_size must be >= 1");
  const auto embeddings = load_embeddings(documents, provider);
  return evaluate_cached(model, documents, embeddings, batch_size);
}

TrainResult train(const TrainConfig& config, const chunker::ChunkedCorpus& corpus,
                  const embed::EmbeddingProvider& provider, const std::optional<std::string>& artifacts_dir) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  const std::size_t num_classes = corpus.manifest.num_classes;
  const std::size_t required = heads::required_input_dim(config.model_name);
  if (required != 0 && required != provider.dim()) {
    throw Error("model " + config.model_name + " needs " + std::to_string(required) +
                "-dim embeddings, provider " + provider.encoder_tag() + " has " + std::to_string(provider.dim()));
  }

  const auto pool = select_split(corpus, corpus::Split::train);
  const auto test_docs = select_split(corpus, corpus::Split::test);
  std::vector<std::size_t> per_class(num_classes, 0);
  for (const auto& d : pool) ++per_class.at(d.label_id);
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (per_class[c] == 0) {
      throw Error("train split has no documents of class '" + corpus.manifest.class_names.at(c) + "'");
    }
  }

  std::vector<ChunkedDocument> train_docs, val_docs;
  if (config.val_fraction > 0.0) {
    split_validation(pool, num_classes, config.val_fraction, config.seed, train_docs, val_docs);
  } else {
    train_docs = pool;
  }
  const auto train_emb = load_embeddings(train_docs, provider);
  const auto val_emb = load_embeddings(val_docs, provider);
  const auto test_emb = load_embeddings(test_docs, provider);

  auto model = heads::build_head<float>(config.model_name, provider.dim(), num_classes, config.seed);
  auto best = heads::build_head<float>(config.model_name, provider.dim(), num_classes, config.seed);
  heads::copy_state(model, best);

  std::vector<std::size_t> counts;
  counts.reserve(train_emb.size());
  for (const auto& e : train_emb) counts.push_back(e.rows);

  const nn::AdamConfig adam{config.lr, 0.9, 0.999, 1e-8};
  TrainReport report;
  report.model_name = config.model_name;
  report.dataset_name = config.dataset_name.empty() ? corpus.manifest.name : config.dataset_name;
  report.input_dim = model.input_dim();

  double best_score = -1.0;
  std::size_t since_best = 0;
  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (const auto& members : make_batches(counts, config.batch_size, config.seed, epoch)) {
      const auto batch = assemble(train_emb, train_docs, members);
      const nn::ForwardContext ctx{nn::Mode::train, config.seed, step++};
      model.params().zero_grad();
      const auto logits = model.forward(batch.values, batch.lengths, ctx);
      const auto loss = nn::softmax_crossentropy(logits, batch.labels);
      if (!std::isfinite(loss.loss)) throw Error("training diverged: non-finite loss");
      model.backward(loss.dlogits);
      nn::adam_step(model.params(), adam);
      loss_sum += static_cast<double>(loss.loss) * static_cast<double>(members.size());
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = loss_sum / static_cast<double>(train_docs.size());
    rec.train_accuracy = evaluate_cached(model, train_docs, train_emb, config.batch_size).metrics.accuracy;
    if (!val_docs.empty()) {
      rec.val_accuracy = evaluate_cached(model, val_docs, val_emb, config.batch_size).metrics.accuracy;
    }
    report.epochs.push_back(rec);

    const double score = rec.val_accuracy.value_or(rec.train_accuracy);
    if (score > best_score) {
      best_score = score;
      report.best_epoch = rec.epoch;
      heads::copy_state(model, best);
      since_best = 0;
    } else {
      ++since_best;
    }
    if (config.target_train_accuracy && rec.train_accuracy >= *config.target_train_accuracy) break;
    if (config.early_stop_patience > 0 && since_best >= config.early_stop_patience) break;
  }

  heads::copy_state(best, model);
  auto test_eval = evaluate_cached(model, test_docs, test_emb, config.batch_size);
  report.test = std::move(test_eval.metrics);
  report.test_predictions = std::move(test_eval.predictions);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  if (artifacts_dir) {
    namespace fs = std::filesystem;
    const fs::path dir(*artifacts_dir);
    fs::create_directories(dir);
    report.best_checkpoint_path = (dir / "checkpoint.bin").string();
    heads::save_checkpoint(model, report.best_checkpoint_path);
    std::ofstream(dir / "config.json") << config.to_json().dump(2) << '\n';
    std::ofstream(dir / "metrics.json") << metrics_to_json(report.test, corpus.manifest.class_names).dump(2) << '\n';
    std::ofstream(dir / "report.json") << report.to_json().dump(2) << '\n';
    write_predictions((dir / "predictions.csv").string(), report.test_predictions);
  }
  return TrainResult{std::move(report), std::move(model)};
}

}  // namespace hierdoc::harness

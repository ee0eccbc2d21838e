// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "hierdoc/checkpoint.hpp"
#include "hierdoc/experiment.hpp"
#include "hierdoc/synthetic.hpp"
#include "hierdoc/table.hpp"
#include "hierdoc/trainer.hpp"

using namespace hierdoc;
using namespace hierdoc::harness;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  chunker::ChunkedCorpus chunks;
  std::unique_ptr<embed::HashEmbedder> provider;
};

Fixture synthetic_fixture(std::size_t train_docs, std::size_t test_docs, std::size_t dim, double signal) {
  synthetic::SyntheticSpec spec;
  spec.train_docs = train_docs;
  spec.test_docs = test_docs;
  spec.max_words = 80;
  Fixture f;
  f.chunks = chunker::chunk_corpus(synthetic::make_corpus(spec), 20);
  f.provider = std::make_unique<embed::HashEmbedder>(f.chunks, dim, 5, signal);
  return f;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("hierdoc_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Prediction pred(std::string id, std::size_t t, std::size_t p) { return {std::move(id), t, p, 0.5}; }

}  // namespace

TEST_CASE("accuracy and confusion from hand-built predictions") {
  const std::vector<Prediction> p{pred("a", 0, 0), pred("b", 1, 1), pred("c", 2, 1), pred("d", 0, 0)};
  const auto m = compute_metrics(p, 3, 0.0);
  CHECK(m.accuracy == 0.75);
  CHECK(m.confusion == std::vector<std::vector<std::size_t>>{{2, 0, 0}, {0, 1, 0}, {0, 1, 0}});
  CHECK(m.support == std::vector<std::size_t>{2, 1, 1});
  CHECK(m.precision[1] == 0.5);
  CHECK(m.recall[2] == 0.0);
  CHECK(m.precision[2] == 0.0);  // never predicted

  // A predictor that always answers class 0 on five balanced classes.
  std::vector<Prediction> constant;
  for (std::size_t i = 0; i < 50; ++i) constant.push_back(pred("x" + std::to_string(i), i % 5, 0));
  const auto c = compute_metrics(constant, 5, 1.0);
  CHECK(c.accuracy == doctest::Approx(0.2));
  for (std::size_t k = 0; k < 5; ++k) {
    std::size_t row = 0;
    for (auto v : c.confusion[k]) row += v;
    CHECK(row == c.support[k]);
  }

  const auto j = metrics_to_json(m, {"a", "b", "c"});
  CHECK(j["accuracy"] == 0.75);
  CHECK(j["per_class"]["b"]["precision"] == 0.5);
  CHECK(j["confusion"][2][1] == 1);
  CHECK_THROWS(compute_metrics(std::vector<Prediction>{pred("a", 3, 0)}, 3, 0.0));
}

TEST_CASE("predictions CSV round trip") {
  const std::vector<Prediction> p{{"doc,1", 0, 2, 0.875}, {"doc\"2", 1, 1, 0.25}};
  const auto path = (fresh_dir("pred") / "p.csv").string();
  write_predictions(path, p);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "doc_id,true_label,pred_label,confidence");
  CHECK(read_predictions(path) == p);
}

TEST_CASE("reference table rendering") {
  const auto ref = ReferenceTable::load(std::string(HIERDOC_DATA_DIR) + "/table1_reference.json");
  CHECK(ref.models.size() == 9);
  CHECK(ref.datasets.size() == 6);
  CHECK(ref.value("BERT+LSTM", "BBC News") == 98.43);
  CHECK(ref.value("USE", "20NG") == 81.76);
  CHECK(ref.value("Longformer", "20NG") == 86.45);
  CHECK(ref.value("BigBird", "IMDB") == 94.32);
  CHECK_FALSE(ref.value("HAN", "synthetic").has_value());
  CHECK(format_reference(98.2) == "98.2");
  CHECK(format_reference(100) == "100");
  CHECK(format_reference(85.78) == "85.78");

  const std::string header =
      "| Model | 20NG | BBC News | AG News | BBC Sports | IMDB | R8 |\n|---|---|---|---|---|---|---|\n";
  const auto md = render_reference(ref);
  CHECK(md.starts_with(header));
  CHECK(md.find("| BERT+CNN | 83.79 | 98.2 | 92.4 | 100 | 93.63 | 96.35 |\n") != std::string::npos);
  CHECK(md.find("| Longformer | 86.45 | 98.65 | 93.4 | 100 | 93.3 | 97.85 |\n") != std::string::npos);
  CHECK(std::count(md.begin(), md.end(), '\n') == 2 + 9);

  CHECK(emit_table({}, ref) == header);

  TrainReport a;
  a.model_name = "bert_lstm";
  a.dataset_name = "bbc_news";
  a.input_dim = 768;
  a.test.accuracy = 0.9843;
  TrainReport b;
  b.model_name = "flat_mean";
  b.dataset_name = "20ng";
  b.input_dim = 512;
  b.test.accuracy = 0.8;
  const std::vector<TrainReport> reports{a, b};
  const auto table = emit_table(reports, ref);
  // Rows follow the reference order: USE before BERT+LSTM.
  CHECK(table.find("| USE | 80.00 (ref 81.76, -1.76) | - | - | - | - | - |\n") != std::string::npos);
  CHECK(table.find("| BERT+LSTM | - | 98.43 (ref 98.43, +0.00) | - | - | - | - |\n") != std::string::npos);
  CHECK(table.find("| USE |") < table.find("| BERT+LSTM |"));

  CHECK(display_model_name("flat_mean", 768) == "BERT");
  CHECK(display_model_name("use_cnn", 512) == "USE+CNN");
  CHECK(display_dataset_name("bbc_sports") == "BBC Sports");
}

TEST_CASE("make_batches partitions indices deterministically") {
  std::vector<std::size_t> counts;
  for (std::size_t i = 0; i < 103; ++i) counts.push_back(1 + (i * 37) % 11);
  const auto a = make_batches(counts, 8, 3, 0);
  CHECK(a == make_batches(counts, 8, 3, 0));
  CHECK(a != make_batches(counts, 8, 3, 1));
  CHECK(a != make_batches(counts, 8, 4, 0));
  std::vector<std::size_t> seen;
  for (const auto& b : a) {
    CHECK(!b.empty());
    CHECK(b.size() <= 8);
    seen.insert(seen.end(), b.begin(), b.end());
  }
  std::sort(seen.begin(), seen.end());
  std::vector<std::size_t> all(counts.size());
  std::iota(all.begin(), all.end(), 0);
  CHECK(seen == all);
  CHECK(a.size() == 13);
  CHECK(make_batches(std::vector<std::size_t>{}, 8, 3, 0).empty());
}

TEST_CASE("train config JSON") {
  TrainConfig c;
  c.model_name = "use_lstm";
  c.dataset_name = "r8";
  c.target_train_accuracy = 1.0;
  const auto back = TrainConfig::from_json(nlohmann::json::parse(c.to_json().dump()));
  CHECK(back.to_json() == c.to_json());
  CHECK(back.target_train_accuracy == 1.0);

  c.model_name = "han";
  CHECK_THROWS(c.validate());
  c.model_name = "use_cnn";
  c.batch_size = 0;
  CHECK_THROWS(c.validate());
  CHECK_THROWS(TrainConfig::from_json(nlohmann::json::parse(R"({"model_name": "use_cnn", "lr": "fast"})")));
}

TEST_CASE("training is deterministic and evaluation leaves the model untouched") {
  auto f = synthetic_fixture(48, 24, 512, 0.4);
  TrainConfig c;
  c.model_name = "use_cnn";
  c.dataset_name = "synthetic";
  c.epochs = 3;
  c.batch_size = 8;
  c.seed = 9;
  c.early_stop_patience = 0;
  auto r1 = train(c, f.chunks, *f.provider);
  auto r2 = train(c, f.chunks, *f.provider);
  REQUIRE(r1.report.epochs.size() == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(std::abs(r1.report.epochs[e].train_loss - r2.report.epochs[e].train_loss) <= 1e-12);
  }
  CHECK(serialize_predictions(r1.report.test_predictions) == serialize_predictions(r2.report.test_predictions));

  const auto before = heads::serialize_checkpoint(r1.model);
  const auto docs = select_split(f.chunks, corpus::Split::test);
  const auto e1 = evaluate(r1.model, docs, *f.provider, 5);
  CHECK(heads::serialize_checkpoint(r1.model) == before);
  // Batch size does not change predictions.
  const auto e2 = evaluate(r1.model, docs, *f.provider, 32);
  CHECK(e1.predictions.size() == docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    CHECK(e1.predictions[i].doc_id == docs[i].doc_id);
    CHECK(e1.predictions[i].pred_label == e2.predictions[i].pred_label);
  }
  CHECK(e1.metrics.accuracy == r1.report.test.accuracy);

  c.seed = 10;
  auto r3 = train(c, f.chunks, *f.provider);
  CHECK(r3.report.epochs[0].train_loss != r1.report.epochs[0].train_loss);
}

TEST_CASE("loss decreases over the first epochs") {
  auto f = synthetic_fixture(64, 16, 512, 0.3);
  TrainConfig c;
  c.model_name = "flat_mean";
  c.dataset_name = "synthetic";
  c.epochs = 5;
  c.batch_size = 16;
  c.lr = 1e-2;
  c.val_fraction = 0;
  c.early_stop_patience = 0;
  const auto r = train(c, f.chunks, *f.provider);
  REQUIRE(r.report.epochs.size() == 5);
  for (std::size_t e = 1; e < 5; ++e) CHECK(r.report.epochs[e].train_loss < r.report.epochs[e - 1].train_loss);
}

TEST_CASE("validation split and early stopping") {
  auto f = synthetic_fixture(60, 12, 512, 0.0);  // no class signal: validation plateaus
  TrainConfig c;
  c.model_name = "flat_mean";
  c.dataset_name = "synthetic";
  c.epochs = 40;
  c.early_stop_patience = 2;
  c.val_fraction = 0.2;
  const auto r = train(c, f.chunks, *f.provider);
  CHECK(r.report.epochs.front().val_accuracy.has_value());
  CHECK(r.report.epochs.size() < 40);
  CHECK(r.report.epochs.size() <= r.report.best_epoch + 2);
}

TEST_CASE("run_experiment from a run.json writes consistent artifacts") {
  const auto dir = fresh_dir("run");
  synthetic::SyntheticSpec spec;
  spec.train_docs = 40;
  spec.test_docs = 20;
  spec.max_words = 60;
  const auto data = synthetic::make_corpus(spec);
  corpus::write_dataset(data, (dir / "corpus.csv").string());
  std::ofstream(dir / "manifest.json") << corpus::manifest_to_json(data.manifest);
  std::ofstream(dir / "run.json") << R"({"model_name": "flat_mean", "dataset_name": "synthetic", "epochs": 4,
    "manifest": "manifest.json", "corpus": "corpus.csv",
    "embedder": {"dim": 64, "seed": 1, "class_signal": 0.5}, "artifacts_dir": "out"})";

  const auto result = run_experiment((dir / "run.json").string());
  const auto out = dir / "out";
  for (auto name : {"config.json", "metrics.json", "report.json", "predictions.csv", "checkpoint.bin"}) {
    CHECK(fs::exists(out / name));
  }
  // Recount accuracy from the predictions file.
  const auto preds = read_predictions((out / "predictions.csv").string());
  CHECK(preds.size() == 20);
  std::size_t correct = 0;
  for (const auto& p : preds) correct += p.true_label == p.pred_label;
  CHECK(static_cast<double>(correct) / 20.0 == result.report.test.accuracy);

  std::ifstream rin(out / "report.json");
  const auto report = TrainReport::from_json(nlohmann::json::parse(rin));
  CHECK(report.test.accuracy == result.report.test.accuracy);
  CHECK(report.model_name == "flat_mean");
  CHECK(report.input_dim == 64);

  std::ifstream cin(out / "config.json");
  const auto cfg = nlohmann::json::parse(cin);
  CHECK(cfg["seed"] == 42);
  CHECK(cfg["epochs"] == 4);

  auto model = heads::load_checkpoint<float>((out / "checkpoint.bin").string());
  const auto prepared = prepare(ExperimentConfig::load((dir / "run.json").string()));
  const auto again = evaluate(model, select_split(prepared.chunks, corpus::Split::test), *prepared.provider);
  CHECK(again.predictions == result.report.test_predictions);
}

TEST_CASE("experiment config errors") {
  const auto base = nlohmann::json::parse(R"({"model_name": "flat_mean", "manifest": "m.json", "corpus": "c.csv"})");
  CHECK_THROWS_AS(ExperimentConfig::from_json(base), FormatError);  // neither store nor embedder
  auto both = base;
  both["store"] = "x.emb";
  both["embedder"] = nlohmann::json::object();
  CHECK_THROWS_AS(ExperimentConfig::from_json(both), FormatError);
  auto ok = base;
  ok["store"] = "x.emb";
  const auto c = ExperimentConfig::from_json(ok, "/data/run");
  CHECK(c.store_path == "/data/run/x.emb");
  CHECK(c.manifest_path == "/data/run/m.json");
  CHECK_THROWS(ExperimentConfig::load("/nonexistent/run.json"));
}

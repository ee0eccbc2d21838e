// SPDX-License-Identifier: Apache-2.0
// hierdoc: preprocess, chunk, embed, split, stats, synth, train, eval and table.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "hierdoc/checkpoint.hpp"
#include "hierdoc/chunker.hpp"
#include "hierdoc/corpus.hpp"
#include "hierdoc/csv.hpp"
#include "hierdoc/embedstore.hpp"
#include "hierdoc/error.hpp"
#include "hierdoc/experiment.hpp"
#include "hierdoc/synthetic.hpp"
#include "hierdoc/table.hpp"
#include "hierdoc/textprep.hpp"
#include "hierdoc/trainer.hpp"

#ifndef HIERDOC_DATA_DIR
#define HIERDOC_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace hierdoc;
using namespace hierdoc::harness;
using hierdoc::heads::load_checkpoint;

namespace {

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << text;
}

// Replaces the text column of a doc_id,split,label,text CSV with its
// cleaned form; other columns pass through untouched.
int cmd_preprocess(const std::string& in, const std::string& out_path, const std::string& contractions) {
  const auto rows = csv::read_file(in);
  if (rows.empty()) throw FormatError(in + ": empty file");
  const auto& header = rows.front();
  const auto it = std::find(header.begin(), header.end(), "text");
  if (it == header.end()) throw FormatError(in + ": no text column");
  const std::size_t text_col = static_cast<std::size_t>(it - header.begin());

  const textprep::ContractionTable table = contractions.empty()
                                               ? textprep::ContractionTable::builtin()
                                               : textprep::ContractionTable::from_file(contractions);
  std::ostringstream out;
  csv::write_row(out, header);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    csv::Row row = rows[r];
    if (row.size() != header.size()) {
      throw FormatError(in + ": row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) + " fields");
    }
    row[text_col] = textprep::preprocess(row[text_col], table).text;
    csv::write_row(out, row);
  }
  write_text(out_path, out.str());
  return 0;
}

int cmd_chunk(const std::string& in, const std::string& manifest_path, std::size_t chunk_size, std::size_t max_chunks,
              const std::string& out_path) {
  const auto manifest = corpus::load_manifest(manifest_path);
  const auto data = corpus::load_dataset(manifest, in);
  if (chunk_size == 0) chunk_size = manifest.default_chunk_size;
  const auto chunks = chunker::chunk_corpus(data, chunk_size, max_chunks);
  std::ostringstream out;
  chunker::write_jsonl(out, chunks);
  write_text(out_path, out.str());
  std::cerr << chunks.documents.size() << " documents, chunk size " << chunk_size << '\n';
  return 0;
}

int cmd_embed_verify(const std::string& chunks_path, const std::string& store_path) {
  const auto chunks = chunker::read_jsonl(chunks_path);
  const auto store = embed::open_store(store_path);
  const auto report = embed::verify(chunks, *store);
  std::cout << report.summary() << '\n';
  return report.ok() ? 0 : 1;
}

int cmd_embed_hash(const std::string& chunks_path, std::size_t dim, std::uint64_t seed,
                   std::optional<double> class_signal, const std::string& out_path) {
  const auto chunks = chunker::read_jsonl(chunks_path);
  const embed::HashEmbedder embedder(chunks, dim, seed, class_signal);
  std::vector<embed::DocEmbedding> entries;
  entries.reserve(chunks.documents.size());
  for (const auto& d : chunks.documents) entries.push_back(embedder.lookup(d.doc_id));
  embed::write_store(entries, dim, embedder.encoder_tag(), out_path);
  std::cerr << entries.size() << " documents written to " << out_path << '\n';
  return 0;
}

int cmd_split(const std::string& in, const std::string& manifest_path, double fraction, std::uint64_t seed,
              const std::string& out_path) {
  const auto manifest = corpus::load_manifest(manifest_path);
  const auto split = corpus::stratified_split(corpus::load_dataset(manifest, in), fraction, seed);
  corpus::check_split_counts(split);
  write_text(out_path, corpus::serialize_dataset(split));
  return 0;
}

int cmd_stats(const std::string& in, const std::string& manifest_path) {
  const auto manifest = corpus::load_manifest(manifest_path);
  const auto data = corpus::load_dataset(manifest, in);
  const auto stats = corpus::corpus_stats(data);
  nlohmann::ordered_json j;
  j["documents"] = data.documents.size();
  j["train"] = data.count(corpus::Split::train);
  j["test"] = data.count(corpus::Split::test);
  j["unsplit"] = data.count(corpus::Split::unsplit);
  j["avg_words"] = stats.avg_words;
  j["max_words"] = stats.max_words;
  j["suggested_chunk_size"] = chunker::choose_chunk_size(stats.avg_words);
  auto& hist = j["class_histogram"] = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < manifest.class_names.size(); ++c) {
    hist[manifest.class_names[c]] = stats.class_histogram[c];
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_synth(const synthetic::SyntheticSpec& spec, const std::string& dir) {
  const auto data = synthetic::make_corpus(spec);
  fs::create_directories(dir);
  corpus::write_dataset(data, (fs::path(dir) / "corpus.csv").string());
  write_text((fs::path(dir) / "manifest.json").string(), corpus::manifest_to_json(data.manifest) + "\n");
  std::cerr << data.documents.size() << " documents written to " << dir << '\n';
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& artifacts) {
  auto config = ExperimentConfig::load(config_path);
  if (!artifacts.empty()) config.artifacts_dir = artifacts;
  const auto result = run_experiment(config);
  const auto& r = result.report;
  std::cout << r.model_name << " on " << r.dataset_name << ": test accuracy " << r.test.accuracy << " (best epoch "
            << r.best_epoch << ", " << r.epochs.size() << " epochs, " << r.wall_seconds << " s)\n";
  if (config.artifacts_dir) std::cout << "artifacts: " << *config.artifacts_dir << '\n';
  return 0;
}

int cmd_eval(const std::string& config_path, std::string checkpoint, const std::string& split_name,
             const std::string& metrics_out, const std::string& predictions_out) {
  const auto config = ExperimentConfig::load(config_path);
  if (checkpoint.empty()) {
    if (!config.artifacts_dir) throw Error("eval: no --checkpoint and no artifacts_dir in the config");
    checkpoint = (fs::path(*config.artifacts_dir) / "checkpoint.bin").string();
  }
  auto model = load_checkpoint<float>(checkpoint);
  const auto data = prepare(config);
  const auto docs = select_split(data.chunks, corpus::parse_split(split_name));
  const auto result = evaluate(model, docs, *data.provider, config.train.batch_size);
  write_text(metrics_out, metrics_to_json(result.metrics, data.chunks.manifest.class_names).dump(2) + "\n");
  if (!predictions_out.empty()) write_predictions(predictions_out, result.predictions);
  return 0;
}

int cmd_table(const std::string& reference_path, const std::vector<std::string>& report_paths,
              const std::string& out_path) {
  const auto reference = ReferenceTable::load(reference_path);
  if (report_paths.empty()) {
    write_text(out_path, render_reference(reference));
    return 0;
  }
  std::vector<TrainReport> reports;
  for (const auto& p : report_paths) {
    std::ifstream in(p);
    if (!in) throw NotFoundError("cannot open " + p);
    reports.push_back(TrainReport::from_json(nlohmann::json::parse(in)));
  }
  write_text(out_path, emit_table(reports, reference));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical long-document classification"};
  app.require_subcommand(1);

  std::string in, out, manifest, config, store, chunks, checkpoint, contractions, artifacts;
  std::string reference = std::string(HIERDOC_DATA_DIR) + "/table1_reference.json";
  std::string split_name = "test", predictions;
  std::vector<std::string> reports;
  std::size_t chunk_size = 0, max_chunks = chunker::kDefaultMaxChunks, dim = 512;
  std::uint64_t seed = 0;
  double fraction = 0.8;
  std::optional<double> class_signal;

  auto* pre = app.add_subcommand("preprocess", "Clean the text column of a corpus CSV");
  pre->add_option("--in", in, "doc_id,split,label,text CSV")->required();
  pre->add_option("--out", out, "Output CSV ('-' for stdout)")->required();
  pre->add_option("--contractions", contractions, "Contraction table JSON (default: built in)");

  auto* chk = app.add_subcommand("chunk", "Preprocess, tokenize and chunk a corpus into chunks.jsonl");
  chk->add_option("--in", in, "Corpus CSV")->required();
  chk->add_option("--manifest", manifest, "Dataset manifest JSON")->required();
  chk->add_option("--chunk-size", chunk_size, "Words per chunk (default: the manifest's)");
  chk->add_option("--max-chunks", max_chunks, "Chunks kept per document")->capture_default_str();
  chk->add_option("--out", out, "Output JSONL")->required();

  auto* emb = app.add_subcommand("embed", "Embedding store utilities");
  emb->require_subcommand(1);
  auto* ver = emb->add_subcommand("verify", "Check a store against chunks.jsonl");
  ver->add_option("--chunks", chunks)->required();
  ver->add_option("--store", store)->required();
  auto* hsh = emb->add_subcommand("hash", "Write a store of hashed bag-of-words chunk embeddings");
  hsh->add_option("--chunks", chunks)->required();
  hsh->add_option("--dim", dim)->capture_default_str();
  hsh->add_option("--seed", seed)->capture_default_str();
  hsh->add_option("--class-signal", class_signal, "Add a per-class direction of this magnitude (synthetic runs)");
  hsh->add_option("--out", out)->required();

  auto* spl = app.add_subcommand("split", "Stratified train/test split for datasets without a canonical one");
  spl->add_option("--in", in)->required();
  spl->add_option("--manifest", manifest)->required();
  spl->add_option("--fraction", fraction, "Train fraction")->capture_default_str();
  spl->add_option("--seed", seed)->capture_default_str();
  spl->add_option("--out", out)->required();

  auto* sts = app.add_subcommand("stats", "Corpus statistics");
  sts->add_option("--in", in)->required();
  sts->add_option("--manifest", manifest)->required();

  synthetic::SyntheticSpec synth;
  auto* syn = app.add_subcommand("synth", "Write a synthetic corpus.csv and manifest.json");
  syn->add_option("--out-dir", out)->required();
  syn->add_option("--classes", synth.num_classes)->capture_default_str();
  syn->add_option("--train", synth.train_docs)->capture_default_str();
  syn->add_option("--test", synth.test_docs)->capture_default_str();
  syn->add_option("--min-words", synth.min_words)->capture_default_str();
  syn->add_option("--max-words", synth.max_words)->capture_default_str();
  syn->add_option("--seed", synth.seed)->capture_default_str();

  auto* trn = app.add_subcommand("train", "Train and test one head");
  trn->add_option("--config", config, "run.json")->required();
  trn->add_option("--artifacts", artifacts, "Override artifacts_dir");

  auto* evl = app.add_subcommand("eval", "Evaluate a checkpoint");
  evl->add_option("--config", config, "run.json")->required();
  evl->add_option("--checkpoint", checkpoint, "Default: <artifacts_dir>/checkpoint.bin");
  evl->add_option("--split", split_name)->check(CLI::IsMember({"train", "test"}))->capture_default_str();
  evl->add_option("--out", out, "Metrics JSON (default stdout)");
  evl->add_option("--predictions", predictions, "Predictions CSV");

  auto* tbl = app.add_subcommand("table", "Results table against the reference values");
  tbl->add_option("--reference", reference)->capture_default_str();
  tbl->add_option("reports", reports, "report.json files; none prints the reference table");
  tbl->add_option("--out", out, "Markdown output (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*pre) return cmd_preprocess(in, out, contractions);
    if (*chk) return cmd_chunk(in, manifest, chunk_size, max_chunks, out);
    if (*ver) return cmd_embed_verify(chunks, store);
    if (*hsh) return cmd_embed_hash(chunks, dim, seed, class_signal, out);
    if (*spl) return cmd_split(in, manifest, fraction, seed, out);
    if (*sts) return cmd_stats(in, manifest);
    if (*syn) return cmd_synth(synth, out);
    if (*trn) return cmd_train(config, artifacts);
    if (*evl) return cmd_eval(config, checkpoint, split_name, out, predictions);
    if (*tbl) return cmd_table(reference, reports, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

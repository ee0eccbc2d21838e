// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails. Oracles here are written independently of the library.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "hierdoc/checkpoint.hpp"
#include "hierdoc/chunker.hpp"
#include "hierdoc/embedstore.hpp"
#include "hierdoc/gradcheck.hpp"
#include "hierdoc/heads.hpp"
#include "hierdoc/rng.hpp"
#include "hierdoc/synthetic.hpp"
#include "hierdoc/textprep.hpp"
#include "hierdoc/trainer.hpp"

using namespace hierdoc;
using nn::Tensor;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

template <typename T>
Tensor<T> random_tensor(nn::Shape shape, CounterRng rng, double scale) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<T>(rng.normal() * scale);
  return t;
}

// ---------------------------------------------------------------- gradients

Outcome gradient_correctness() {
  using nn::LayerKind;
  using nn::LayerSpec;
  const auto t0 = Clock::now();
  Outcome o;
  double worst_layer = 0, worst_lstm = 0, worst_head = 0, worst_head_lstm = 0;
  std::size_t checks = 0;

  // Entries straddling a ReLU / max switch point are excluded, but only a few.
  auto kink_budget_ok = [](const nn::GradCheckReport& r) {
    return r.skipped_kinks <= std::max<std::size_t>(2, r.checked / 20);
  };

  const std::vector<std::pair<LayerSpec, bool>> kinds{
      {LayerSpec::dense(5, nn::Activation::linear), false},
      {LayerSpec::dense(5, nn::Activation::relu), false},
      {LayerSpec::dense(5, nn::Activation::tanh), false},
      {LayerSpec::conv1d(4, 1), true},
      {LayerSpec::conv1d(4, 3), true},
      {LayerSpec::maxpool1d(2), true},
      {LayerSpec::global_maxpool(), true},
      {LayerSpec::mean_pool(), true},
      {LayerSpec::dropout(0.5), false},
      {LayerSpec::batchnorm(), false},
      {LayerSpec::of(LayerKind::relu), false},
      {LayerSpec::of(LayerKind::tanh), false},
      {LayerSpec::of(LayerKind::softmax), false},
      {LayerSpec::bilstm(5, true), true},
      {LayerSpec::bilstm(5, false), true},
  };
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CounterRng shape_rng(seed, "acceptance/shapes");
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      const auto& [spec, seq] = kinds[k];
      const std::size_t B = 2 + shape_rng.below(3);
      const std::size_t T = 1 + shape_rng.below(6);
      const std::size_t C = 2 + shape_rng.below(5);
      auto layer = nn::make_layer<double>(spec, C, k, seed);
      nn::Batch<double> in;
      if (seq) {
        in.values = random_tensor<double>({B, T, C}, CounterRng(seed, "acceptance/x").derive(k), 1.0);
        for (std::size_t b = 0; b < B; ++b) in.lengths.push_back(b == 0 ? T : 1 + shape_rng.below(T));
        for (std::size_t b = 0; b < B; ++b) {
          for (std::size_t t = in.lengths[b]; t < T; ++t) {
            for (std::size_t c = 0; c < C; ++c) in.values.at(b, t, c) = 0.0;
          }
        }
      } else {
        in.values = random_tensor<double>({B + 2, C}, CounterRng(seed, "acceptance/x").derive(k), 1.0);
      }
      const auto r = nn::gradient_check_layer(*layer, in, nn::ForwardContext{nn::Mode::train, seed, k},
                                              {.seed = seed, .kink_tolerance = 1e-3});
      ++checks;
      const bool lstm = spec.kind == LayerKind::bilstm;
      (lstm ? worst_lstm : worst_layer) = std::max(lstm ? worst_lstm : worst_layer, r.max_rel_error);
      if (!r.passed(lstm ? 1e-3 : 1e-4) || !kink_budget_ok(r)) {
        o.pass = false;
        o.detail += fmt(" [%s seed %llu: %g at %s]", std::string(nn::to_string(spec.kind)).c_str(),
                        static_cast<unsigned long long>(seed), r.max_rel_error, r.worst.c_str());
      }
    }
    for (auto name : heads::kModelNames) {
      const std::size_t need = heads::required_input_dim(name);
      const std::size_t D = need ? need : 16 + shape_rng.below(32);
      const std::size_t B = 2 + shape_rng.below(3);
      const std::size_t T = 1 + shape_rng.below(4);
      auto model = heads::build_head<double>(name, D, 2 + shape_rng.below(3), seed);
      auto x = random_tensor<double>({B, T, D}, CounterRng(seed, "acceptance/head").derive(D), 0.1);
      std::vector<std::size_t> lengths, labels;
      for (std::size_t b = 0; b < B; ++b) {
        lengths.push_back(b == 0 ? T : 1 + shape_rng.below(T));
        labels.push_back(shape_rng.below(model.num_classes()));
        for (std::size_t t = lengths[b]; t < T; ++t) {
          for (std::size_t d = 0; d < D; ++d) x.at(b, t, d) = 0.0;
        }
      }
      const auto r = heads::gradient_check(model, x, lengths, labels, nn::ForwardContext{nn::Mode::train, seed, 1},
                                           {.max_entries_per_tensor = 8, .seed = seed, .kink_tolerance = 1e-3});
      ++checks;
      const bool lstm = std::string_view(name).find("lstm") != std::string_view::npos;
      (lstm ? worst_head_lstm : worst_head) = std::max(lstm ? worst_head_lstm : worst_head, r.max_rel_error);
      if (!r.passed(lstm ? 1e-3 : 1e-4) || !kink_budget_ok(r)) {
        o.pass = false;
        o.detail += fmt(" [%s seed %llu: %g at %s, %zu kinks]", std::string(name).c_str(),
                        static_cast<unsigned long long>(seed), r.max_rel_error, r.worst.c_str(), r.skipped_kinks);
      }
    }
  }
  const double secs = seconds_since(t0);
  if (secs >= 120.0) o.pass = false;
  o.detail = fmt("%zu checks; worst rel err layers %.2e, bilstm %.2e, heads %.2e, lstm heads %.2e; %.1f s", checks,
                 worst_layer, worst_lstm, worst_head, worst_head_lstm, secs) +
             o.detail;
  return o;
}

// ------------------------------------------------------------ preprocessing

Outcome golden_preprocessing() {
  std::ifstream in(HIERDOC_TEST_DATA "/preprocess_golden.json");
  if (!in) return {false, "cannot open golden file"};
  const auto pairs = nlohmann::json::parse(in);
  Outcome o;
  std::size_t ok = 0;
  for (const auto& p : pairs) {
    const std::string input = p.at("input");
    const std::string expected = p.at("expected");
    const std::string got = textprep::preprocess(input).text;
    if (got == expected) {
      ++ok;
    } else {
      o.pass = false;
      o.detail += " [" + input + " -> " + got + ", expected " + expected + "]";
    }
  }
  if (pairs.size() < 20) o.pass = false;
  o.detail = fmt("%zu/%zu pairs byte-exact", ok, pairs.size()) + o.detail;
  return o;
}

// ------------------------------------------------------------------ chunker

Outcome chunker_properties() {
  CounterRng rng(2024, "acceptance/chunker");
  Outcome o;
  std::size_t failures = 0;
  for (std::size_t trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(trial % 10 == 0 ? 5000 : 400);
    const std::size_t size = 1 + rng.below(80);
    const std::size_t max_chunks = 1 + rng.below(80);
    textprep::TokenSequence tokens(n);
    for (std::size_t i = 0; i < n; ++i) tokens[i] = "w" + std::to_string(rng.below(50));

    const auto doc = chunker::chunk(tokens, size, max_chunks);

    // Brute force: walk the tokens, opening a new chunk every `size` tokens
    // until `max_chunks` are full.
    std::size_t brute = 0, fill = 0, kept = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (fill == 0) {
        if (brute == max_chunks) break;
        ++brute;
      }
      ++kept;
      fill = (fill + 1) % size;
    }

    bool good = doc.chunks.size() == brute && doc.truncated == (kept < n);
    textprep::TokenSequence joined;
    for (std::size_t c = 0; c < doc.chunks.size(); ++c) {
      const auto& ch = doc.chunks[c];
      good &= !ch.empty() && ch.size() <= size;
      if (c + 1 < doc.chunks.size()) good &= ch.size() == size;
      joined.insert(joined.end(), ch.begin(), ch.end());
    }
    good &= joined.size() == kept && std::equal(joined.begin(), joined.end(), tokens.begin());
    if (!good) {
      ++failures;
      if (failures <= 3) o.detail += fmt(" [n=%zu size=%zu max=%zu]", n, size, max_chunks);
    }
  }
  o.pass = failures == 0;
  o.detail = fmt("1000 random sequences, %zu failures", failures) + o.detail;
  return o;
}

// ------------------------------------------------------------ embed store

Outcome store_round_trip() {
  const auto dir = fs::temp_directory_path() / "hierdoc_acceptance_store";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Outcome o;
  CounterRng rng(99, "acceptance/store");

  const std::size_t dim = 37;
  std::vector<embed::DocEmbedding> docs;
  for (std::size_t i = 0; i < 100; ++i) {
    embed::DocEmbedding d;
    d.doc_id = "m" + std::to_string(i) + (i % 7 == 0 ? "/é" : "");
    d.dim = dim;
    d.rows = 1 + rng.below(20);
    d.values.resize(d.rows * dim);
    for (auto& v : d.values) {
      // Raw bit patterns cover signs, subnormals and extremes; NaN/Inf are
      // excluded because stores reject them.
      std::uint32_t bits;
      do {
        bits = static_cast<std::uint32_t>(rng.next_u64());
      } while (((bits >> 23) & 0xFF) == 0xFF);
      std::memcpy(&v, &bits, 4);
    }
    docs.push_back(std::move(d));
  }
  const auto path = (dir / "m.emb").string();
  embed::write_store(docs, dim, "acceptance", path);
  const auto store = embed::open_store(path);
  std::size_t exact = 0;
  for (const auto& d : docs) {
    const auto back = store->lookup(d.doc_id);
    exact += back.rows == d.rows && back.values.size() == d.values.size() &&
             std::memcmp(back.values.data(), d.values.data(), d.values.size() * 4) == 0;
  }
  o.pass = exact == docs.size() && store->dim() == dim && store->encoder_tag() == "acceptance";

  // Inject a row-count corruption: the store is built from chunks where one
  // document lost its last chunk.
  synthetic::SyntheticSpec spec;
  spec.train_docs = 20;
  spec.test_docs = 10;
  spec.min_words = 45;
  spec.max_words = 120;
  const auto chunks = chunker::chunk_corpus(synthetic::make_corpus(spec), 20);
  const embed::HashEmbedder hash(chunks, 16, 1);
  std::vector<embed::DocEmbedding> entries;
  for (const auto& d : chunks.documents) entries.push_back(hash.lookup(d.doc_id));
  const std::string victim = entries[7].doc_id;
  entries[7].rows -= 1;
  entries[7].values.resize(entries[7].rows * 16);
  const auto bad_path = (dir / "bad.emb").string();
  embed::write_store(entries, 16, hash.encoder_tag(), bad_path);
  const auto report = embed::verify(chunks, *embed::open_store(bad_path));
  const bool caught = !report.ok() && report.row_mismatches.size() == 1 && report.row_mismatches[0].first == victim;

  // The untouched store verifies.
  entries[7] = hash.lookup(victim);
  embed::write_store(entries, 16, hash.encoder_tag(), bad_path);
  const bool clean_ok = embed::verify(chunks, *embed::open_store(bad_path)).ok();

  o.pass = o.pass && caught && clean_ok;
  o.detail = fmt("%zu/100 matrices bit-exact; corruption %s; clean store %s", exact, caught ? "caught" : "MISSED",
                 clean_ok ? "verifies" : "REJECTED");
  fs::remove_all(dir);
  return o;
}

// --------------------------------------------------------------- training

struct TrainFixture {
  chunker::ChunkedCorpus chunks;
  std::unique_ptr<embed::HashEmbedder> e512, e768;
  const embed::HashEmbedder& for_model(std::string_view name) const {
    return heads::required_input_dim(name) == 768 ? *e768 : *e512;
  }
};

TrainFixture make_fixture(const synthetic::SyntheticSpec& spec, std::size_t chunk_size,
                          std::optional<double> signal) {
  TrainFixture f;
  f.chunks = chunker::chunk_corpus(synthetic::make_corpus(spec), chunk_size);
  f.e512 = std::make_unique<embed::HashEmbedder>(f.chunks, 512, 11, signal);
  f.e768 = std::make_unique<embed::HashEmbedder>(f.chunks, 768, 11, signal);
  return f;
}

constexpr const char* kHierHeads[] = {"use_lstm", "use_cnn", "bert_lstm", "bert_cnn"};

Outcome overfit_capacity() {
  const auto t0 = Clock::now();
  synthetic::SyntheticSpec spec;
  spec.train_docs = 32;
  spec.test_docs = 8;
  spec.min_words = 20;
  spec.max_words = 120;
  const auto f = make_fixture(spec, 20, std::nullopt);
  Outcome o;
  for (auto name : kHierHeads) {
    harness::TrainConfig c;
    c.model_name = name;
    c.dataset_name = "synthetic";
    c.epochs = 200;
    c.batch_size = 8;
    c.val_fraction = 0.0;
    c.early_stop_patience = 0;
    c.target_train_accuracy = 1.0;
    const auto t = Clock::now();
    const auto r = harness::train(c, f.chunks, f.for_model(name));
    const double acc = r.report.epochs.back().train_accuracy;
    o.pass &= acc == 1.0;
    o.detail += fmt(" %s %.0f%% @%zu (%.0fs);", std::string(name).c_str(), 100 * acc, r.report.epochs.size(),
                    seconds_since(t));
  }
  const double secs = seconds_since(t0);
  o.pass &= secs < 300.0;
  o.detail = fmt("%.1f s:", secs) + o.detail;
  return o;
}

Outcome synthetic_separable() {
  const auto t0 = Clock::now();
  synthetic::SyntheticSpec spec;  // 200 train / 100 test, 4 classes
  const auto f = make_fixture(spec, 20, 0.3);
  Outcome o;
  for (auto name : heads::kModelNames) {
    harness::TrainConfig c;
    c.model_name = name;
    c.dataset_name = "synthetic";
    const auto t = Clock::now();
    const auto r = harness::train(c, f.chunks, f.for_model(name));
    const double acc = r.report.test.accuracy;
    const double bar = std::string_view(name) == "flat_mean" ? 0.99 : 0.95;
    o.pass &= acc >= bar;
    o.detail += fmt(" %s %.1f%% (%.0fs);", std::string(name).c_str(), 100 * acc, seconds_since(t));
  }
  const double secs = seconds_since(t0);
  o.pass &= secs < 600.0;
  o.detail = fmt("%.1f s:", secs) + o.detail;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  synthetic::SyntheticSpec spec;
  spec.train_docs = 64;
  spec.test_docs = 32;
  spec.max_words = 100;
  const auto f = make_fixture(spec, 20, 0.2);
  const auto root = fs::temp_directory_path() / "hierdoc_acceptance_determinism";
  fs::remove_all(root);
  Outcome o;
  for (auto name : heads::kModelNames) {
    harness::TrainConfig c;
    c.model_name = name;
    c.dataset_name = "synthetic";
    c.epochs = 3;
    c.batch_size = 16;
    c.seed = 1234;
    const auto a = harness::train(c, f.chunks, f.for_model(name), (root / name / "a").string());
    const auto b = harness::train(c, f.chunks, f.for_model(name), (root / name / "b").string());
    double worst = 0;
    bool same_shape = a.report.epochs.size() == b.report.epochs.size();
    for (std::size_t e = 0; same_shape && e < a.report.epochs.size(); ++e) {
      worst = std::max(worst, std::abs(a.report.epochs[e].train_loss - b.report.epochs[e].train_loss));
    }
    const auto pa = slurp(root / name / "a" / "predictions.csv");
    const bool same_preds = !pa.empty() && pa == slurp(root / name / "b" / "predictions.csv");
    const bool ok = same_shape && worst <= 1e-12 && same_preds;
    o.pass &= ok;
    o.detail += fmt(" %s %s (max loss diff %.1e);", std::string(name).c_str(), ok ? "ok" : "DIFFERS", worst);
  }
  fs::remove_all(root);
  return o;
}

Outcome padding_invariance() {
  Outcome o;
  double worst = 0;
  for (auto name : heads::kModelNames) {
    const std::size_t need = heads::required_input_dim(name);
    const std::size_t D = need ? need : 512;
    auto model = heads::build_head<float>(name, D, 5, 77);
    const nn::ForwardContext eval{nn::Mode::eval, 0, 0};
    CounterRng rng(5, "acceptance/padding");
    for (std::size_t trial = 0; trial < 4; ++trial) {
      const std::size_t T = 1 + rng.below(8);
      const std::size_t extra = 1 + rng.below(6);
      const auto doc = random_tensor<float>({1, T, D}, rng.derive(trial), 0.2);
      const auto base = model.forward(doc, {}, eval);
      // The padded slots hold arbitrary values; only the mask says they are empty.
      auto padded = random_tensor<float>({1, T + extra, D}, rng.derive(100 + trial), 3.0);
      Tensor<float> mask({1, T + extra});
      for (std::size_t t = 0; t < T; ++t) {
        mask.at(0, t) = 1.0f;
        for (std::size_t d = 0; d < D; ++d) padded.at(0, t, d) = doc.at(0, t, d);
      }
      const auto out = model.forward_masked(padded, mask, eval);
      for (std::size_t c = 0; c < base.size(); ++c) {
        worst = std::max(worst, static_cast<double>(std::abs(out[c] - base[c])));
      }
    }
  }
  o.pass = worst < 1e-5;
  o.detail = fmt("5 heads x 4 documents, max |delta logit| %.2e", worst);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient-correctness", gradient_correctness}, {"preprocessing-golden", golden_preprocessing},
      {"chunker-properties", chunker_properties},     {"embedstore-round-trip", store_round_trip},
      {"overfit-capacity", overfit_capacity},         {"synthetic-separable", synthetic_separable},
      {"determinism", determinism},                   {"padding-invariance", padding_invariance},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

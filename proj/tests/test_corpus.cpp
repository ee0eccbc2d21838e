// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "hierdoc/corpus.hpp"
#include "hierdoc/csv.hpp"
#include "hierdoc/error.hpp"

using namespace hierdoc;
using namespace hierdoc::corpus;

namespace {

DatasetManifest small_manifest() {
  DatasetManifest m;
  m.name = "toy";
  m.num_classes = 3;
  m.class_names = {"alpha", "beta", "gamma"};
  m.avg_words = 10;
  m.default_chunk_size = 20;
  return m;
}

// Builds a canonical CSV with the given per-class counts, all `split`.
std::string make_csv(const DatasetManifest& m, const std::vector<std::size_t>& per_class, std::string_view split) {
  std::ostringstream out;
  csv::write_row(out, {"doc_id", "split", "label", "text"});
  std::size_t id = 0;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    for (std::size_t i = 0; i < per_class[c]; ++i) {
      csv::write_row(out, {"d" + std::to_string(id++), std::string(split), m.class_names[c],
                           "word " + std::to_string(i) + ", \"quoted\"\nsecond line"});
    }
  }
  return out.str();
}

}  // namespace

TEST_CASE("csv parser handles quoting") {
  const auto rows = csv::parse("a,\"b,c\",\"d\"\"e\"\r\n\"multi\nline\",,x\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == csv::Row{"a", "b,c", "d\"e"});
  CHECK(rows[1] == csv::Row{"multi\nline", "", "x"});
  CHECK_THROWS_AS(csv::parse("\"open"), FormatError);
  CHECK(csv::escape("plain") == "plain");
  CHECK(csv::escape("a\"b") == "\"a\"\"b\"");
}

TEST_CASE("manifest json") {
  auto m = manifest_from_json(R"({"name":"x","num_classes":2,"class_names":["zeta","alpha"],
                                  "avg_words":39,"default_chunk_size":20,"canonical_split":true,
                                  "train_count":3,"test_count":1})");
  CHECK(m.class_names == std::vector<std::string>{"alpha", "zeta"});
  CHECK(m.label_of("zeta") == 1);
  CHECK_THROWS_AS(m.label_of("other"), NotFoundError);
  CHECK(manifest_from_json(manifest_to_json(m)) == m);
  CHECK_THROWS_AS(manifest_from_json(R"({"name":"x","num_classes":3,"class_names":["a"],"avg_words":1,
                                          "default_chunk_size":20,"canonical_split":true})"),
                  FormatError);
  CHECK_THROWS_AS(manifest_from_json(R"({"name":"x","num_classes":1,"class_names":["a"],"avg_words":1,
                                          "default_chunk_size":60,"canonical_split":true})"),
                  FormatError);
}

TEST_CASE("shipped manifests load") {
  for (const auto* name : {"20ng", "bbc_news", "ag_news", "bbc_sports", "imdb", "r8"}) {
    CAPTURE(name);
    const auto m = load_manifest(std::string(HIERDOC_DATA_DIR) + "/manifests/" + name + ".json");
    CHECK(m.name == name);
  }
  const auto ng = load_manifest(std::string(HIERDOC_DATA_DIR) + "/manifests/20ng.json");
  CHECK(ng.num_classes == 20);
  CHECK(*ng.train_count == 11314);
  CHECK(*ng.test_count == 7532);
  const auto ag = load_manifest(std::string(HIERDOC_DATA_DIR) + "/manifests/ag_news.json");
  CHECK(ag.avg_words == 39);
}

TEST_CASE("load_dataset parses and validates") {
  const auto m = small_manifest();
  const auto c = parse_dataset(m, make_csv(m, {2, 3, 1}, "train"));
  CHECK(c.documents.size() == 6);
  CHECK(c.documents[2].label_id == 1);
  CHECK(c.documents[0].raw_text == "word 0, \"quoted\"\nsecond line");

  CHECK_THROWS_WITH_AS(parse_dataset(m, ""), doctest::Contains("no records"), FormatError);
  CHECK_THROWS_WITH_AS(parse_dataset(m, "doc_id,split,label,text\n"), doctest::Contains("no records"),
                       FormatError);
  CHECK_THROWS_AS(parse_dataset(m, "doc_id,split,label,text\na,train,alpha\n"), FormatError);
  CHECK_THROWS_AS(parse_dataset(m, "doc_id,split,label,text\na,train,delta,x\n"), NotFoundError);
  CHECK_THROWS_AS(parse_dataset(m, "doc_id,split,label,text\na,train,alpha,x\na,test,beta,y\n"), FormatError);
  CHECK_THROWS_AS(parse_dataset(m, "doc_id,split,label,text\na,train,alpha,   \n"), FormatError);
  CHECK_THROWS_AS(load_dataset(m, "/nonexistent/file.csv"), FormatError);
}

TEST_CASE("canonical split counts must match the manifest") {
  auto m = small_manifest();
  m.canonical_split = true;
  m.train_count = 6;
  m.test_count = 0;
  CHECK_NOTHROW(parse_dataset(m, make_csv(m, {2, 3, 1}, "train")));
  m.train_count = 5;
  CHECK_THROWS_AS(parse_dataset(m, make_csv(m, {2, 3, 1}, "train")), FormatError);
}

TEST_CASE("20NG-sized canonical source loads with the published counts") {
  auto m = load_manifest(std::string(HIERDOC_DATA_DIR) + "/manifests/20ng.json");
  std::ostringstream out;
  csv::write_row(out, {"doc_id", "split", "label", "text"});
  for (std::size_t i = 0; i < 11314 + 7532; ++i) {
    csv::write_row(out, {"n" + std::to_string(i), i < 11314 ? "train" : "test", m.class_names[i % 20], "text"});
  }
  const auto c = parse_dataset(m, out.str());
  CHECK(c.count(Split::train) == 11314);
  CHECK(c.count(Split::test) == 7532);
  CHECK(c.manifest.num_classes == 20);
}

TEST_CASE("BBC Sports source splits 590 / 147") {
  auto m = load_manifest(std::string(HIERDOC_DATA_DIR) + "/manifests/bbc_sports.json");
  // Class sizes of the BBC Sport collection (athletics, cricket, football, rugby, tennis).
  const auto c = parse_dataset(m, make_csv(m, {101, 124, 265, 147, 100}, "unsplit"));
  const auto s = stratified_split(c, 0.8, 42);
  CHECK(s.count(Split::train) == 590);
  CHECK(s.count(Split::test) == 147);
  CHECK_NOTHROW(check_split_counts(s));
}

TEST_CASE("stratified split of BBC News class sizes") {
  auto m = load_manifest(std::string(HIERDOC_DATA_DIR) + "/manifests/bbc_news.json");
  const std::vector<std::size_t> sizes{510, 386, 417, 511, 401};
  const auto c = parse_dataset(m, make_csv(m, sizes, "unsplit"));
  const auto s = stratified_split(c, 0.8, 42);
  CHECK(s.count(Split::train) == 1780);
  CHECK(s.count(Split::test) == 445);

  // Brute-force per-class recount.
  std::vector<std::size_t> train_per_class(5, 0);
  for (const auto& d : s.documents) {
    if (d.split == Split::train) ++train_per_class[d.label_id];
  }
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(std::abs(static_cast<double>(train_per_class[k]) - 0.8 * static_cast<double>(sizes[k])) <= 1.0);
  }

  CHECK(stratified_split(c, 0.8, 42) == s);
  CHECK(stratified_split(c, 0.8, 43) != s);
}

TEST_CASE("stratified split properties over random class sizes") {
  auto m = small_manifest();
  for (std::size_t trial = 0; trial < 30; ++trial) {
    const std::vector<std::size_t> sizes{2 + trial % 7, 2 + (trial * 5) % 11, 2 + (trial * 3) % 13};
    const auto c = parse_dataset(m, make_csv(m, sizes, "unsplit"));
    for (double f : {0.3, 0.5, 0.8}) {
      const auto s = stratified_split(c, f, trial);
      const std::size_t n = c.documents.size();
      CHECK(s.count(Split::train) + s.count(Split::test) == n);
      CHECK(s.count(Split::unsplit) == 0);
      const double floor_target = std::floor(f * static_cast<double>(n));
      CHECK(std::abs(static_cast<double>(s.count(Split::train)) - floor_target) <= 3.0);
    }
  }
}

TEST_CASE("stratified split errors") {
  auto m = small_manifest();
  const auto c = parse_dataset(m, make_csv(m, {1, 3, 3}, "unsplit"));
  CHECK_THROWS(stratified_split(c, 0.8, 1));
  const auto ok = parse_dataset(m, make_csv(m, {2, 3, 3}, "unsplit"));
  CHECK_THROWS(stratified_split(ok, 1.0, 1));
  CHECK_THROWS(stratified_split(ok, 0.0, 1));
}

TEST_CASE("corpus_stats") {
  auto m = small_manifest();
  Corpus c{m, {}};
  c.documents.push_back({"a", std::string(10 * 2 - 1, ' '), 0, Split::train});
  c.documents[0].raw_text = "w w w w w w w w w w";
  c.documents.push_back({"b", "", 2, Split::train});
  for (int i = 0; i < 30; ++i) c.documents[1].raw_text += " x ";
  const auto s = corpus_stats(c);
  CHECK(s.avg_words == doctest::Approx(20.0));
  CHECK(s.max_words == 30);
  CHECK(s.class_histogram == std::vector<std::size_t>{1, 0, 1});

  Corpus one{m, {{"z", "one two three", 1, Split::train}}};
  CHECK(corpus_stats(one).avg_words == doctest::Approx(3.0));
  CHECK_THROWS(corpus_stats(Corpus{m, {}}));
}

TEST_CASE("serialize then load round-trips") {
  const auto m = small_manifest();
  const auto c = parse_dataset(m, make_csv(m, {2, 2, 2}, "train"));
  CHECK(parse_dataset(m, serialize_dataset(c)) == c);
  const auto path = (std::filesystem::temp_directory_path() / "hierdoc_corpus_rt.csv").string();
  write_dataset(c, path);
  CHECK(load_dataset(m, path) == c);
  std::filesystem::remove(path);
}

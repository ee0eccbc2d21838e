// SPDX-License-Identifier: Apache-2.0
#include "hierdoc/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hierdoc/error.hpp"

namespace hierdoc::harness {

namespace {

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string signed2(double v) {
  // Deltas that round to zero print as +0.00, never -0.00.
  v = std::round(v * 100.0) / 100.0;
  if (v == 0.0) v = 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.2f", v);
  return buf;
}

void header_rows(std::ostringstream& out, const std::vector<std::string>& columns) {
  out << "| Model |";
  for (const auto& c : columns) out << ' ' << c << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) out << "---|";
  out << '\n';
}

}  // namespace

std::optional<double> ReferenceTable::value(std::string_view model, std::string_view dataset) const {
  auto it = values.find({std::string(model), std::string(dataset)});
  if (it == values.end()) return std::nullopt;
  return it->second;
}

ReferenceTable ReferenceTable::from_json(std::string_view json_text) {
  ReferenceTable t;
  try {
    const auto j = nlohmann::ordered_json::parse(json_text);
    t.models = j.at("models").get<std::vector<std::string>>();
    t.datasets = j.at("datasets").get<std::vector<std::string>>();
    for (const auto& [model, row] : j.at("values").items()) {
      for (const auto& [dataset, v] : row.items()) {
        t.values[{model, dataset}] = v.get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("reference table: ") + e.what());
  }
  return t;
}

ReferenceTable ReferenceTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::string display_model_name(std::string_view model_name, std::size_t input_dim) {
  if (model_name == "use_lstm") return "USE+LSTM";
  if (model_name == "use_cnn") return "USE+CNN";
  if (model_name == "bert_lstm") return "BERT+LSTM";
  if (model_name == "bert_cnn") return "BERT+CNN";
  if (model_name == "flat_mean") {
    if (input_dim == 512) return "USE";
    if (input_dim == 768) return "BERT";
    return "flat_mean-" + std::to_string(input_dim);
  }
  return std::string(model_name);
}

std::string display_dataset_name(std::string_view dataset_name) {
  static const std::map<std::string, std::string, std::less<>> names{
      {"20ng", "20NG"},           {"bbc_news", "BBC News"}, {"ag_news", "AG News"},
      {"bbc_sports", "BBC Sports"}, {"imdb", "IMDB"},         {"r8", "R8"}};
  auto it = names.find(dataset_name);
  return it == names.end() ? std::string(dataset_name) : it->second;
}

std::string format_reference(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) throw Error("format_reference: conversion failed");
  return std::string(buf, end);
}

std::string render_reference(const ReferenceTable& reference) {
  std::ostringstream out;
  header_rows(out, reference.datasets);
  for (const auto& model : reference.models) {
    out << "| " << model << " |";
    for (const auto& dataset : reference.datasets) {
      const auto v = reference.value(model, dataset);
      out << ' ' << (v ? format_reference(*v) : std::string("-")) << " |";
    }
    out << '\n';
  }
  return out.str();
}

std::string emit_table(std::span<const TrainReport> reports, const ReferenceTable& reference) {
  std::vector<std::string> columns = reference.datasets;
  std::map<std::pair<std::string, std::string>, double> measured;
  std::vector<std::string> rows;
  for (const auto& r : reports) {
    const std::string model = display_model_name(r.model_name, r.input_dim);
    const std::string dataset = display_dataset_name(r.dataset_name);
    if (std::find(columns.begin(), columns.end(), dataset) == columns.end()) columns.push_back(dataset);
    if (std::find(rows.begin(), rows.end(), model) == rows.end()) rows.push_back(model);
    measured[{model, dataset}] = r.test.accuracy * 100.0;
  }
  // Reference order first, then models the reference does not list.
  auto rank = [&](const std::string& m) {
    auto it = std::find(reference.models.begin(), reference.models.end(), m);
    return static_cast<std::size_t>(it - reference.models.begin());
  };
  std::stable_sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) { return rank(a) < rank(b); });

  std::ostringstream out;
  header_rows(out, columns);
  for (const auto& model : rows) {
    out << "| " << model << " |";
    for (const auto& dataset : columns) {
      auto it = measured.find({model, dataset});
      if (it == measured.end()) {
        out << " - |";
        continue;
      }
      out << ' ' << fixed2(it->second);
      if (const auto ref = reference.value(model, dataset)) {
        out << " (ref " << fixed2(*ref) << ", " << signed2(it->second - *ref) << ')';
      }
      out << " |";
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace hierdoc::harness

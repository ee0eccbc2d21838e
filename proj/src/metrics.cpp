// SPDX-License-Identifier: Apache-2.0
#include "hierdoc/metrics.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hierdoc/csv.hpp"
#include "hierdoc/error.hpp"

namespace hierdoc::harness {

Metrics compute_metrics(std::span<const Prediction> predictions, std::size_t num_classes, double loss) {
  Metrics m;
  m.loss = loss;
  m.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (const auto& p : predictions) {
    if (p.true_label >= num_classes || p.pred_label >= num_classes) {
      throw FormatError("metrics: label out of range for " + p.doc_id);
    }
    ++m.confusion[p.true_label][p.pred_label];
  }
  std::size_t correct = 0;
  m.precision.assign(num_classes, 0.0);
  m.recall.assign(num_classes, 0.0);
  m.support.assign(num_classes, 0);
  for (std::size_t c = 0; c < num_classes; ++c) {
    correct += m.confusion[c][c];
    std::size_t predicted = 0;
    for (std::size_t r = 0; r < num_classes; ++r) {
      m.support[c] += m.confusion[c][r];
      predicted += m.confusion[r][c];
    }
    if (predicted) m.precision[c] = static_cast<double>(m.confusion[c][c]) / static_cast<double>(predicted);
    if (m.support[c]) m.recall[c] = static_cast<double>(m.confusion[c][c]) / static_cast<double>(m.support[c]);
  }
  m.accuracy = predictions.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(predictions.size());
  return m;
}

nlohmann::ordered_json metrics_to_json(const Metrics& metrics, const std::vector<std::string>& class_names) {
  nlohmann::ordered_json j;
  j["accuracy"] = metrics.accuracy;
  j["loss"] = metrics.loss;
  nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < metrics.support.size(); ++c) {
    const std::string name = c < class_names.size() ? class_names[c] : std::to_string(c);
    per_class[name] = {{"precision", metrics.precision[c]}, {"recall", metrics.recall[c]},
                       {"support", metrics.support[c]}};
  }
  j["per_class"] = per_class;
  j["confusion"] = metrics.confusion;
  return j;
}

std::string serialize_predictions(std::span<const Prediction> predictions) {
  std::ostringstream out;
  out << "doc_id,true_label,pred_label,confidence\n";
  char buf[64];
  for (const auto& p : predictions) {
    std::snprintf(buf, sizeof buf, "%.9g", p.confidence);
    csv::write_row(out, {p.doc_id, std::to_string(p.true_label), std::to_string(p.pred_label), buf});
  }
  return out.str();
}

void write_predictions(const std::string& path, std::span<const Prediction> predictions) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << serialize_predictions(predictions);
}

std::vector<Prediction> read_predictions(const std::string& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty() || rows[0] != csv::Row{"doc_id", "true_label", "pred_label", "confidence"}) {
    throw FormatError("predictions file " + path + ": bad header");
  }
  std::vector<Prediction> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 4) throw FormatError("predictions file " + path + ": bad row " + std::to_string(r));
    Prediction p;
    p.doc_id = rows[r][0];
    p.true_label = std::stoul(rows[r][1]);
    p.pred_label = std::stoul(rows[r][2]);
    p.confidence = std::stod(rows[r][3]);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace hierdoc::harness

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace hierdoc::harness {

struct Prediction {
  std::string doc_id;
  std::size_t true_label = 0;
  std::size_t pred_label = 0;
  double confidence = 0.0;  // softmax probability of pred_label

  bool operator==(const Prediction&) const = default;
};

struct Metrics {
  double accuracy = 0.0;
  double loss = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<std::size_t> support;
  /// confusion[true][pred]
  std::vector<std::vector<std::size_t>> confusion;
};

/// Precision of a class never predicted is reported as 0.
Metrics compute_metrics(std::span<const Prediction> predictions, std::size_t num_classes, double loss);

/// {accuracy, loss, per_class:{name:{precision,recall,support}}, confusion:[[...]]}
nlohmann::ordered_json metrics_to_json(const Metrics& metrics, const std::vector<std::string>& class_names);

/// Header `doc_id,true_label,pred_label,confidence`; labels are class ids.
void write_predictions(const std::string& path, std::span<const Prediction> predictions);
std::string serialize_predictions(std::span<const Prediction> predictions);
std::vector<Prediction> read_predictions(const std::string& path);

}  // namespace hierdoc::harness

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hierdoc/trainer.hpp"

namespace hierdoc::harness {

/// Published benchmark accuracies (percent), keyed by (model, dataset)
/// display names. Row and column order follow the file.
struct ReferenceTable {
  std::vector<std::string> models;
  std::vector<std::string> datasets;
  std::map<std::pair<std::string, std::string>, double> values;

  std::optional<double> value(std::string_view model, std::string_view dataset) const;

  static ReferenceTable from_json(std::string_view json_text);
  static ReferenceTable load(const std::string& path);
};

/// "use_lstm" -> "USE+LSTM". flat_mean maps to the standalone encoder row
/// matching its input width (512: "USE", 768: "BERT").
std::string display_model_name(std::string_view model_name, std::size_t input_dim);
/// "bbc_news" -> "BBC News"; unknown names pass through.
std::string display_dataset_name(std::string_view dataset_name);

/// Shortest decimal that round-trips (98.2, 100, 85.78).
std::string format_reference(double value);

/// The reference grid as a markdown table, values printed as stored.
std::string render_reference(const ReferenceTable& reference);

/// Markdown table of measured accuracies: one row per model, one column per
/// dataset, each cell "acc (ref r, delta)" with two decimals. Columns are
/// the reference datasets followed by any others that appear in reports.
std::string emit_table(std::span<const TrainReport> reports, const ReferenceTable& reference);

}  // namespace hierdoc::harness

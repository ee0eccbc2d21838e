// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hierdoc::textprep {

/// Output of preprocess: only [a-z0-9] tokens separated by single spaces,
/// no leading or trailing whitespace.
struct CleanText {
  std::string text;
  bool operator==(const CleanText&) const = default;
};

using TokenSequence = std::vector<std::string>;

/// Lowercase contraction -> expansion map, matched longest entry first.
class ContractionTable {
 public:
  /// The table shipped in data/contractions.json (compiled in).
  static const ContractionTable& builtin();
  static ContractionTable from_json(std::string_view json_text);
  static ContractionTable from_file(const std::string& path);

  std::size_t size() const { return entries_.size(); }
  /// Entries sorted by decreasing key length, then key.
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Removes `<...>` tags (tag must open with a letter, '/', '!' or '?'),
/// replacing each with one space, then decodes the five XML entities.
/// An unclosed '<' is kept verbatim.
std::string strip_html(std::string_view text);

/// Unicode lowercase mapping.
std::string lowercase(std::string_view text);

/// NFKD decomposition followed by removal of combining marks.
std::string fold_accents(std::string_view text);

/// Normalizes curly apostrophes to ', then replaces whole-word contractions.
std::string expand_contractions(std::string_view text,
                                const ContractionTable& table = ContractionTable::builtin());

/// Every byte outside [a-z0-9] and whitespace becomes a space; whitespace
/// runs collapse to one space; the result is trimmed.
std::string remove_special_chars(std::string_view text);

/// HTML -> lowercase -> accents -> contractions -> special characters.
CleanText preprocess(std::string_view text,
                     const ContractionTable& table = ContractionTable::builtin());

TokenSequence tokenize(const CleanText& clean);

}  // namespace hierdoc::textprep

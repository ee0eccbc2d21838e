// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace hierdoc::csv {

using Row = std::vector<std::string>;

/// Parses RFC-4180 CSV: quoted fields may hold commas, doubled quotes and
/// line breaks; records end at LF or CRLF. A trailing newline does not
/// produce an empty record.
std::vector<Row> parse(std::string_view text);

/// Reads and parses a whole file. Throws FormatError if it cannot be opened.
std::vector<Row> read_file(const std::string& path);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const Row& row);

}  // namespace hierdoc::csv

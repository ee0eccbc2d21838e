// SPDX-License-Identifier: Apache-2.0
#include "hierdoc/textprep.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/locid.h>
#include <unicode/unistr.h>

#include <json.hpp>

#include "hierdoc/error.hpp"

namespace hierdoc::textprep {

namespace detail {
extern const std::string_view kContractionsJson;
}

namespace {

bool is_alnum_lower(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); }

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool opens_tag(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '/' || c == '!' || c == '?';
}

std::string decode_entities(std::string_view text) {
  static constexpr std::array<std::pair<std::string_view, char>, 5> kEntities{{
      {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}, {"&apos;", '\''}}};
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    bool decoded = false;
    if (text[i] == '&') {
      for (const auto& [name, ch] : kEntities) {
        if (text.compare(i, name.size(), name) == 0) {
          out.push_back(ch);
          i += name.size();
          decoded = true;
          break;
        }
      }
    }
    if (!decoded) out.push_back(text[i++]);
  }
  return out;
}

std::string to_utf8(const icu::UnicodeString& s) {
  std::string out;
  s.toUTF8String(out);
  return out;
}

// A contraction may start where the previous character is not part of a
// word. An apostrophe counts as part of a word only when it follows one.
bool starts_word(std::string_view text, std::size_t i) {
  if (i == 0) return true;
  const char prev = text[i - 1];
  if (is_alnum_lower(prev)) return false;
  if (prev == '\'') return !(i >= 2 && is_alnum_lower(text[i - 2]));
  return true;
}

bool ends_word(std::string_view text, std::size_t j) {
  if (j >= text.size()) return true;
  const char next = text[j];
  if (is_alnum_lower(next)) return false;
  if (next == '\'') return !(j + 1 < text.size() && is_alnum_lower(text[j + 1]));
  return true;
}

}  // namespace

ContractionTable ContractionTable::from_json(std::string_view json_text) {
  ContractionTable table;
  try {
    const auto j = nlohmann::json::parse(json_text);
    for (const auto& [key, value] : j.items()) {
      if (key.empty()) throw FormatError("contraction table: empty key");
      table.entries_.emplace_back(key, value.get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("contraction table: ") + e.what());
  }
  std::sort(table.entries_.begin(), table.entries_.end(), [](const auto& a, const auto& b) {
    if (a.first.size() != b.first.size()) return a.first.size() > b.first.size();
    return a.first < b.first;
  });
  return table;
}

ContractionTable ContractionTable::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open contraction table " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

const ContractionTable& ContractionTable::builtin() {
  static const ContractionTable table = from_json(detail::kContractionsJson);
  return table;
}

std::string strip_html(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    if (text[i] == '<' && i + 1 < text.size() && opens_tag(text[i + 1])) {
      const auto close = text.find('>', i + 1);
      if (close != std::string_view::npos) {
        out.push_back(' ');
        i = close + 1;
        continue;
      }
    }
    out.push_back(text[i++]);
  }
  return decode_entities(out);
}

std::string lowercase(std::string_view text) {
  auto s = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  s.toLower(icu::Locale::getRoot());
  return to_utf8(s);
}

std::string fold_accents(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfkd = icu::Normalizer2::getNFKDInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFKD normalizer unavailable");
  const auto src = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  const icu::UnicodeString decomposed = nfkd->normalize(src, status);
  if (U_FAILURE(status)) throw Error("ICU NFKD normalization failed");

  icu::UnicodeString kept;
  for (int32_t i = 0; i < decomposed.length();) {
    const UChar32 cp = decomposed.char32At(i);
    const auto type = u_charType(cp);
    if (type != U_NON_SPACING_MARK && type != U_COMBINING_SPACING_MARK && type != U_ENCLOSING_MARK) {
      kept.append(cp);
    }
    i += U16_LENGTH(cp);
  }
  return to_utf8(kept);
}

std::string expand_contractions(std::string_view input, const ContractionTable& table) {
  // U+2018 / U+2019 single quotation marks.
  std::string text;
  text.reserve(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (i + 2 < input.size() && static_cast<unsigned char>(input[i]) == 0xE2 &&
        static_cast<unsigned char>(input[i + 1]) == 0x80 &&
        (static_cast<unsigned char>(input[i + 2]) == 0x98 ||
         static_cast<unsigned char>(input[i + 2]) == 0x99)) {
      text.push_back('\'');
      i += 2;
    } else {
      text.push_back(input[i]);
    }
  }

  std::string out;
  out.reserve(text.size() + 16);
  const std::string_view view(text);
  for (std::size_t i = 0; i < view.size();) {
    if (starts_word(view, i) && (is_alnum_lower(view[i]) || view[i] == '\'')) {
      std::size_t run = i;
      while (run < view.size() && (is_alnum_lower(view[run]) || view[run] == '\'')) ++run;
      if (view.substr(i, run - i).find('\'') != std::string_view::npos) {
        bool matched = false;
        for (const auto& [key, expansion] : table.entries()) {
          if (key.size() <= run - i && view.compare(i, key.size(), key) == 0 &&
              ends_word(view, i + key.size())) {
            out += expansion;
            i += key.size();
            matched = true;
            break;
          }
        }
        if (matched) continue;
        if (view[i] == '\'') {
          out.push_back(view[i++]);
          continue;
        }
      }
      out.append(view.substr(i, run - i));
      i = run;
      continue;
    }
    out.push_back(view[i++]);
  }
  return out;
}

std::string remove_special_chars(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_alnum_lower(c)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    } else {
      pending_space = true;
    }
  }
  return out;
}

CleanText preprocess(std::string_view text, const ContractionTable& table) {
  std::string s = strip_html(text);
  s = lowercase(s);
  s = fold_accents(s);
  s = expand_contractions(s, table);
  return CleanText{remove_special_chars(s)};
}

TokenSequence tokenize(const CleanText& clean) {
  TokenSequence tokens;
  std::string_view rest(clean.text);
  while (!rest.empty()) {
    const auto sp = rest.find(' ');
    auto token = rest.substr(0, sp);
    if (!token.empty()) tokens.emplace_back(token);
    if (sp == std::string_view::npos) break;
    rest.remove_prefix(sp + 1);
  }
  return tokens;
}

}  // namespace hierdoc::textprep

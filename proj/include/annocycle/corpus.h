// Copyright 2026 The Annocycle Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ANNOCYCLE_CORPUS_H_
#define ANNOCYCLE_CORPUS_H_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace annocycle {

struct Label {
  std::string id;
  std::string display_name;
  std::string color;  // "#rrggbb"

  bool operator==(const Label &) const = default;
};

// A token with code-point offsets into its document text, end exclusive.
struct Token {
  std::string text;
  std::size_t char_start = 0;
  std::size_t char_end = 0;

  bool operator==(const Token &) const = default;
};

// Half-open range of token indices.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end > begin ? end - begin : 0; }
  bool empty() const { return end <= begin; }
  bool overlaps(const TokenSpan &other) const {
    return begin < other.end && other.begin < end;
  }
  std::size_t overlap(const TokenSpan &other) const {
    const std::size_t lo = begin > other.begin ? begin : other.begin;
    const std::size_t hi = end < other.end ? end : other.end;
    return hi > lo ? hi - lo : 0;
  }

  auto operator<=>(const TokenSpan &) const = default;
};

// Half-open range of code points.
struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  auto operator<=>(const CharSpan &) const = default;
};

// A labeled token span. Used for gold, produced, and submitted annotations.
struct Annotation {
  TokenSpan span;
  std::string label;

  auto operator<=>(const Annotation &) const = default;
};

using GoldAnnotation = Annotation;

// One presented paragraph.
struct Document {
  std::string id;
  std::string text;
  std::vector<Token> tokens;
  std::optional<std::string> source;
  std::optional<std::vector<GoldAnnotation>> gold;

  bool has_gold() const { return gold.has_value(); }
  bool operator==(const Document &) const = default;
};

struct Corpus {
  std::vector<Label> labels;
  std::vector<Document> documents;

  const Label *find_label(std::string_view id) const;
  const Document *find_document(std::string_view id) const;
  std::size_t gold_entity_count() const;

  bool operator==(const Corpus &) const = default;
};

// Letters, digits and combining marks form maximal runs; any other
// non-whitespace, non-separator code point is a one-character token.
std::vector<Token> tokenize(std::string_view utf8_text);

// Number of code points in a UTF-8 string. Throws ParseError on invalid UTF-8.
std::size_t code_point_length(std::string_view utf8_text);

Document make_document(std::string id, std::string text,
                       std::optional<std::string> source = std::nullopt);

// Char range -> token range. Throws AlignmentError unless both boundaries
// coincide with token boundaries and the range is non-empty.
TokenSpan align_span(const Document &doc, CharSpan chars);

// Token range -> char range. Throws AlignmentError when out of range/empty.
CharSpan to_char_span(const Document &doc, TokenSpan tokens);

// Throws InputError naming the first overlapping pair.
void check_non_overlapping(std::span<const Annotation> annotations,
                           std::string_view what = "annotations");

// Throws ParseError on duplicate ids, empty set, or a malformed color.
void validate_labels(std::span<const Label> labels);

// Parses the corpus file format:
//   {"labels": [{"id","name","color"}],
//    "documents": [{"id"?, "source"?, "text", "gold"?: [{"start_char",
//                   "end_char", "label"}]}]}
Corpus ingest_corpus(std::string_view bytes);
// True for a non-negative JSON integer, however it was constructed.
inline bool is_offset(const nlohmann::json &j) {
  return j.is_number_unsigned() ||
         (j.is_number_integer() && j.get<std::int64_t>() >= 0);
}

Corpus corpus_from_json(const nlohmann::json &j);
nlohmann::json corpus_to_json(const Corpus &corpus);

nlohmann::json label_to_json(const Label &label);
Label label_from_json(const nlohmann::json &j);
std::vector<Label> labels_from_json(const nlohmann::json &j);

// Document with tokens, as served to clients and external ML units.
nlohmann::json document_to_json(const Document &doc, bool include_gold);

}  // namespace annocycle

#endif  // ANNOCYCLE_CORPUS_H_

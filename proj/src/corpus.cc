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

#include "annocycle/corpus.h"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <set>

#include "annocycle/errors.h"

namespace annocycle {
namespace {

using nlohmann::json;

bool is_word_char(UChar32 c) {
  if (u_isalnum(c)) return true;
  const auto mask = U_GET_GC_MASK(c);
  return (mask & U_GC_M_MASK) != 0;
}

bool is_space_or_separator(UChar32 c) {
  return u_isUWhiteSpace(c) || (U_GET_GC_MASK(c) & U_GC_Z_MASK) != 0;
}

bool is_hex_color(std::string_view s) {
  if (s.size() != 7 || s[0] != '#') return false;
  return std::all_of(s.begin() + 1, s.end(), [](char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') ||
           (c >= 'A' && c <= 'F');
  });
}

std::string span_text(CharSpan s) {
  return "(" + std::to_string(s.begin) + "," + std::to_string(s.end) + ")";
}

std::string span_text(TokenSpan s) {
  return "[" + std::to_string(s.begin) + "," + std::to_string(s.end) + ")";
}

}  // namespace

const Label *Corpus::find_label(std::string_view id) const {
  for (const auto &l : labels)
    if (l.id == id) return &l;
  return nullptr;
}

const Document *Corpus::find_document(std::string_view id) const {
  for (const auto &d : documents)
    if (d.id == id) return &d;
  return nullptr;
}

std::size_t Corpus::gold_entity_count() const {
  std::size_t n = 0;
  for (const auto &d : documents)
    if (d.gold) n += d.gold->size();
  return n;
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  const auto *bytes = reinterpret_cast<const uint8_t *>(text.data());
  const int32_t length = static_cast<int32_t>(text.size());

  int32_t i = 0;
  std::size_t cp = 0;
  // Open run of word characters: byte and code-point start.
  int32_t run_byte = -1;
  std::size_t run_cp = 0;

  auto close_run = [&](int32_t end_byte) {
    if (run_byte < 0) return;
    tokens.push_back({std::string(text.substr(run_byte, end_byte - run_byte)),
                      run_cp, cp});
    run_byte = -1;
  };

  while (i < length) {
    const int32_t start = i;
    UChar32 c;
    U8_NEXT(bytes, i, length, c);
    if (c >= 0 && is_word_char(c)) {
      if (run_byte < 0) {
        run_byte = start;
        run_cp = cp;
      }
      ++cp;
      continue;
    }
    close_run(start);
    if (c < 0 || !is_space_or_separator(c)) {
      tokens.push_back(
          {std::string(text.substr(start, i - start)), cp, cp + 1});
    }
    ++cp;
  }
  close_run(length);
  return tokens;
}

std::size_t code_point_length(std::string_view text) {
  const auto *bytes = reinterpret_cast<const uint8_t *>(text.data());
  const int32_t length = static_cast<int32_t>(text.size());
  int32_t i = 0;
  std::size_t n = 0;
  while (i < length) {
    const int32_t start = i;
    UChar32 c;
    U8_NEXT(bytes, i, length, c);
    if (c < 0) {
      throw ParseError("invalid UTF-8 at byte offset " + std::to_string(start));
    }
    ++n;
  }
  return n;
}

Document make_document(std::string id, std::string text,
                       std::optional<std::string> source) {
  Document doc;
  doc.id = std::move(id);
  doc.tokens = tokenize(text);
  doc.text = std::move(text);
  doc.source = std::move(source);
  return doc;
}

TokenSpan align_span(const Document &doc, CharSpan chars) {
  if (chars.end <= chars.begin) {
    throw AlignmentError("document '" + doc.id + "': empty char span " +
                         span_text(chars));
  }
  const auto &toks = doc.tokens;
  auto first = std::lower_bound(
      toks.begin(), toks.end(), chars.begin,
      [](const Token &t, std::size_t c) { return t.char_start < c; });
  if (first == toks.end() || first->char_start != chars.begin) {
    throw AlignmentError("document '" + doc.id + "': char span " +
                         span_text(chars) +
                         " does not start on a token boundary");
  }
  auto last = std::lower_bound(
      first, toks.end(), chars.end,
      [](const Token &t, std::size_t c) { return t.char_end < c; });
  if (last == toks.end() || last->char_end != chars.end) {
    throw AlignmentError("document '" + doc.id + "': char span " +
                         span_text(chars) +
                         " does not end on a token boundary");
  }
  return {static_cast<std::size_t>(first - toks.begin()),
          static_cast<std::size_t>(last - toks.begin()) + 1};
}

CharSpan to_char_span(const Document &doc, TokenSpan tokens) {
  if (tokens.empty() || tokens.end > doc.tokens.size()) {
    throw AlignmentError("document '" + doc.id + "': token span " +
                         span_text(tokens) + " outside 0.." +
                         std::to_string(doc.tokens.size()));
  }
  return {doc.tokens[tokens.begin].char_start,
          doc.tokens[tokens.end - 1].char_end};
}

void check_non_overlapping(std::span<const Annotation> annotations,
                           std::string_view what) {
  std::vector<const Annotation *> sorted;
  sorted.reserve(annotations.size());
  for (const auto &a : annotations) {
    if (a.span.empty()) {
      throw InputError(std::string(what) + ": empty span " +
                       span_text(a.span));
    }
    sorted.push_back(&a);
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const Annotation *a, const Annotation *b) {
              return a->span < b->span;
            });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i - 1]->span.overlaps(sorted[i]->span)) {
      throw InputError(std::string(what) + ": overlapping spans " +
                       span_text(sorted[i - 1]->span) + " and " +
                       span_text(sorted[i]->span));
    }
  }
}

void validate_labels(std::span<const Label> labels) {
  if (labels.empty()) throw ParseError("label set is empty");
  std::set<std::string_view> seen;
  for (const auto &l : labels) {
    if (l.id.empty()) throw ParseError("label with empty id");
    if (!seen.insert(l.id).second) {
      throw ParseError("duplicate label id '" + l.id + "'");
    }
    if (!is_hex_color(l.color)) {
      throw ParseError("label '" + l.id + "': color '" + l.color +
                       "' is not #rrggbb");
    }
  }
}

nlohmann::json label_to_json(const Label &label) {
  return {{"id", label.id}, {"name", label.display_name},
          {"color", label.color}};
}

Label label_from_json(const json &j) {
  if (!j.is_object()) throw ParseError("label is not an object");
  Label l;
  try {
    l.id = j.at("id").get<std::string>();
    l.display_name = j.at("name").get<std::string>();
    l.color = j.at("color").get<std::string>();
  } catch (const json::exception &e) {
    throw ParseError(std::string("label: ") + e.what());
  }
  return l;
}

std::vector<Label> labels_from_json(const json &j) {
  if (!j.is_array()) throw ParseError("\"labels\" must be an array");
  std::vector<Label> labels;
  for (const auto &l : j) labels.push_back(label_from_json(l));
  validate_labels(labels);
  return labels;
}

Corpus corpus_from_json(const json &j) {
  if (!j.is_object()) throw ParseError("corpus must be a JSON object");
  if (!j.contains("labels")) throw ParseError("missing \"labels\"");
  if (!j.contains("documents")) throw ParseError("missing \"documents\"");
  const auto &docs = j.at("documents");
  if (!docs.is_array()) throw ParseError("\"documents\" must be an array");

  Corpus corpus;
  corpus.labels = labels_from_json(j.at("labels"));

  std::set<std::string> ids;
  for (std::size_t index = 0; index < docs.size(); ++index) {
    const auto &rec = docs[index];
    const long rec_index = static_cast<long>(index);
    auto fail = [&](const std::string &msg) {
      return ParseError("record " + std::to_string(index) + ": " + msg,
                        rec_index);
    };
    if (!rec.is_object()) throw fail("not an object");
    if (!rec.contains("text") || !rec["text"].is_string()) {
      throw fail("missing string field \"text\"");
    }
    std::string id;
    if (rec.contains("id")) {
      if (!rec["id"].is_string() || rec["id"].get<std::string>().empty())
        throw fail("\"id\" must be a non-empty string");
      id = rec["id"].get<std::string>();
    } else {
      char buf[32];
      std::snprintf(buf, sizeof buf, "doc-%04zu", index + 1);
      id = buf;
    }
    if (!ids.insert(id).second) throw fail("duplicate document id '" + id + "'");

    std::optional<std::string> source;
    if (rec.contains("source")) {
      if (!rec["source"].is_string()) throw fail("\"source\" must be a string");
      source = rec["source"].get<std::string>();
    }
    std::string text = rec["text"].get<std::string>();
    std::size_t text_length;
    try {
      text_length = code_point_length(text);
    } catch (const ParseError &e) {
      throw fail(e.what());
    }
    Document doc = make_document(std::move(id), std::move(text), source);

    if (rec.contains("gold")) {
      const auto &gold = rec["gold"];
      if (!gold.is_array()) throw fail("\"gold\" must be an array");
      std::vector<GoldAnnotation> spans;
      for (const auto &g : gold) {
        std::size_t start, end;
        std::string label;
        try {
          if (!is_offset(g.at("start_char")) ||
              !is_offset(g.at("end_char"))) {
            throw fail("gold offsets must be non-negative integers");
          }
          start = g.at("start_char").get<std::size_t>();
          end = g.at("end_char").get<std::size_t>();
          label = g.at("label").get<std::string>();
        } catch (const json::exception &e) {
          throw fail(std::string("gold annotation: ") + e.what());
        }
        if (!corpus.find_label(label)) {
          throw fail("gold annotation uses unknown label '" + label + "'");
        }
        if (end > text_length) {
          throw AlignmentError("document '" + doc.id + "': char span " +
                               span_text(CharSpan{start, end}) +
                               " exceeds text length " +
                               std::to_string(text_length));
        }
        spans.push_back({align_span(doc, {start, end}), std::move(label)});
      }
      try {
        check_non_overlapping(spans, "gold of document '" + doc.id + "'");
      } catch (const InputError &e) {
        throw fail(e.what());
      }
      std::sort(spans.begin(), spans.end());
      doc.gold = std::move(spans);
    }
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

Corpus ingest_corpus(std::string_view bytes) {
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::parse_error &e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  return corpus_from_json(j);
}

json corpus_to_json(const Corpus &corpus) {
  json labels = json::array();
  for (const auto &l : corpus.labels) labels.push_back(label_to_json(l));
  json docs = json::array();
  for (const auto &d : corpus.documents) {
    json rec = {{"id", d.id}, {"text", d.text}};
    if (d.source) rec["source"] = *d.source;
    if (d.gold) {
      json gold = json::array();
      for (const auto &g : *d.gold) {
        const CharSpan c = to_char_span(d, g.span);
        gold.push_back(
            {{"start_char", c.begin}, {"end_char", c.end}, {"label", g.label}});
      }
      rec["gold"] = std::move(gold);
    }
    docs.push_back(std::move(rec));
  }
  return {{"labels", std::move(labels)}, {"documents", std::move(docs)}};
}

json document_to_json(const Document &doc, bool include_gold) {
  json tokens = json::array();
  for (const auto &t : doc.tokens) {
    tokens.push_back(
        {{"text", t.text}, {"char_start", t.char_start}, {"char_end", t.char_end}});
  }
  json j = {{"id", doc.id}, {"text", doc.text}, {"tokens", std::move(tokens)}};
  if (doc.source) j["source"] = *doc.source;
  if (include_gold && doc.gold) {
    json gold = json::array();
    for (const auto &g : *doc.gold) {
      gold.push_back({{"start_token", g.span.begin},
                      {"end_token", g.span.end},
                      {"label", g.label}});
    }
    j["gold"] = std::move(gold);
  }
  return j;
}

}  // namespace annocycle

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

#include "annocycle/http_ml_unit.h"

#include <regex>

#include "annocycle/errors.h"
#include "httplib.h"
#include "json.hpp"

namespace annocycle {

using nlohmann::json;

namespace {

json label_ids(const std::vector<Label> &labels) {
  json out = json::array();
  for (const auto &l : labels) out.push_back(l.id);
  return out;
}

}  // namespace

HttpMlUnit::HttpMlUnit(std::string base_url, std::vector<Label> labels,
                       std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), labels_(std::move(labels)), timeout_(timeout) {
  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(base_url_, m, kUrl))
    throw InputError("ML unit base_url must be an http(s) URL: '" + base_url_ + "'");
  origin_ = m[1];
  prefix_ = m[2];
  while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
}

std::string HttpMlUnit::post(const std::string &route, const std::string &body,
                             const std::string &document_id) const {
  httplib::Client client(origin_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  const auto usecs =
      std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  auto res = client.Post(prefix_ + route, body, "application/json");
  if (!res) {
    throw PredictionError(document_id, "ML unit at " + base_url_ + route + ": " +
                                           httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw PredictionError(document_id, "ML unit at " + base_url_ + route +
                                           " answered HTTP " + std::to_string(res->status));
  }
  return res->body;
}

void HttpMlUnit::train(std::span<const TrainingDocument> annotated) {
  json docs = json::array();
  for (const auto &t : annotated) {
    json d = document_to_json(t.document, false);
    json anns = json::array();
    for (const auto &a : t.annotations) {
      anns.push_back(
          {{"start_token", a.span.begin}, {"end_token", a.span.end}, {"label", a.label}});
    }
    d["annotations"] = std::move(anns);
    docs.push_back(std::move(d));
  }
  post("/train", json{{"labels", label_ids(labels_)}, {"documents", std::move(docs)}}.dump(),
       "");
}

std::vector<PreAnnotation> HttpMlUnit::predict(const Document &doc) const {
  const std::string reply = post(
      "/predict",
      json{{"document", document_to_json(doc, false)}, {"labels", label_ids(labels_)}}.dump(),
      doc.id);
  PreAnnotatedDocument parsed;
  try {
    parsed = pre_annotations_from_json(json::parse(reply));
  } catch (const json::exception &e) {
    throw PredictionError(doc.id, std::string("unreadable ML unit reply: ") + e.what());
  } catch (const ParseError &e) {
    throw PredictionError(doc.id, std::string("unreadable ML unit reply: ") + e.what());
  }
  if (parsed.document_id != doc.id) {
    throw PredictionError(doc.id, "ML unit answered for document '" +
                                      parsed.document_id + "'");
  }
  std::vector<Annotation> spans;
  for (auto &p : parsed.annotations) {
    p.intended_category.reset();
    if (p.annotation.span.end > doc.tokens.size())
      throw PredictionError(doc.id, "ML unit span outside the document");
    const bool known = std::any_of(labels_.begin(), labels_.end(),
                                   [&](const Label &l) { return l.id == p.annotation.label; });
    if (!known)
      throw PredictionError(doc.id, "ML unit used unknown label '" + p.annotation.label + "'");
    spans.push_back(p.annotation);
  }
  try {
    check_non_overlapping(spans);
  } catch (const InputError &e) {
    throw PredictionError(doc.id, e.what());
  }
  std::sort(parsed.annotations.begin(), parsed.annotations.end(),
            [](const PreAnnotation &a, const PreAnnotation &b) {
              return a.annotation.span < b.annotation.span;
            });
  return parsed.annotations;
}

}  // namespace annocycle

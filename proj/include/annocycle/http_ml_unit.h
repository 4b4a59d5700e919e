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

#ifndef ANNOCYCLE_HTTP_ML_UNIT_H_
#define ANNOCYCLE_HTTP_ML_UNIT_H_

#include <chrono>
#include <span>
#include <string>
#include <vector>

#include "annocycle/assistance.h"
#include "annocycle/corpus.h"

namespace annocycle {

// MlUnit served by a remote process.
//
//   POST {base_url}/predict  {"document": {id, text, tokens}, "labels": [...]}
//     -> exchange format {"document_id", "annotations": [...]}
//   POST {base_url}/train    {"labels": [...], "documents": [{id, text,
//                             tokens, "annotations": [...]}]}
//
// Transport failures, non-2xx replies and replies that do not fit the
// document raise PredictionError.
class HttpMlUnit : public MlUnit {
 public:
  HttpMlUnit(std::string base_url, std::vector<Label> labels,
             std::chrono::milliseconds timeout = std::chrono::seconds(30));

  void train(std::span<const TrainingDocument> annotated) override;
  std::vector<PreAnnotation> predict(const Document &doc) const override;

  const std::string &base_url() const { return base_url_; }

 private:
  std::string post(const std::string &route, const std::string &body,
                   const std::string &document_id) const;

  std::string base_url_;
  std::string origin_;  // scheme://host[:port]
  std::string prefix_;  // path below the origin, no trailing slash
  std::vector<Label> labels_;
  std::chrono::milliseconds timeout_;
};

}  // namespace annocycle

#endif  // ANNOCYCLE_HTTP_ML_UNIT_H_

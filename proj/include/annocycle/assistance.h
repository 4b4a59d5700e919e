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

#ifndef ANNOCYCLE_ASSISTANCE_H_
#define ANNOCYCLE_ASSISTANCE_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "annocycle/corpus.h"
#include "json.hpp"

namespace annocycle {

// Outcome of comparing one annotation against the gold standard.
enum class ErrorCategory {
  kCorrect,
  kCorrectLabelWrongSpan,
  kWrongLabelCorrectSpan,
  kWrongLabelWrongSpan,
  kUnnecessary,
  kMissing,
};

inline constexpr std::size_t kNumCategories = 6;
inline constexpr std::array<ErrorCategory, kNumCategories> kAllCategories = {
    ErrorCategory::kCorrect,           ErrorCategory::kCorrectLabelWrongSpan,
    ErrorCategory::kWrongLabelCorrectSpan, ErrorCategory::kWrongLabelWrongSpan,
    ErrorCategory::kUnnecessary,       ErrorCategory::kMissing,
};

inline constexpr std::size_t index_of(ErrorCategory c) {
  return static_cast<std::size_t>(c);
}

// "correct", "correct_label_wrong_span", ... as used in every JSON format.
std::string_view category_name(ErrorCategory c);
std::optional<ErrorCategory> parse_category(std::string_view name);

// True for the categories that account for exactly one gold entity.
bool consumes_gold(ErrorCategory c);

// Probability per error category.
class CategoryDistribution {
 public:
  CategoryDistribution() = default;

  // Throws DomainError unless every entry is in [0,1] and the sum is 1
  // within 1e-9.
  explicit CategoryDistribution(const std::array<double, kNumCategories> &p);

  double operator[](ErrorCategory c) const { return p_[index_of(c)]; }
  double sum() const;
  const std::array<double, kNumCategories> &values() const { return p_; }

 private:
  std::array<double, kNumCategories> p_{};
};

// Error mix of a CRF NER model on the study corpus.
const CategoryDistribution &base_distribution();

struct ScaledDistribution {
  // Unnecessary is always 0 here; see spurious_rate.
  CategoryDistribution categories;
  // Expected number of unnecessary annotations per gold entity.
  double spurious_rate = 0.0;
};

// Sets Correct to target_recall and spreads the remaining mass over the
// gold-consuming error categories in proportion to their base weights.
ScaledDistribution scale_distribution(const CategoryDistribution &base,
                                      double target_recall);

struct PreAnnotation {
  Annotation annotation;
  double confidence = 1.0;  // (0, 1]
  // Set by the simulator only; never sent to annotators.
  std::optional<ErrorCategory> intended_category;

  bool operator==(const PreAnnotation &) const = default;
};

struct DegradeResult {
  std::vector<PreAnnotation> annotations;  // sorted by span
  // One entry per substitution (e.g. impossible span perturbation).
  std::vector<std::string> notes;

  bool operator==(const DegradeResult &) const = default;
};

// Candidate wrong spans for a gold span: each single boundary moved by one
// token, plus the span shifted by one token. All candidates lie within
// [0, token_count), are non-empty, differ from `source`, and overlap it.
std::vector<TokenSpan> span_perturbations(TokenSpan source,
                                          std::size_t token_count);

// Seeded degradation of a document's gold annotations. Each gold entity
// independently draws one of Correct, CorrectLabelWrongSpan,
// WrongLabelCorrectSpan, WrongLabelWrongSpan or Missing; then
// Binomial(gold count, spurious_rate) unnecessary annotations are placed on
// free 1-2 token spans. Throws PredictionError if doc has no gold.
DegradeResult degrade(const Document &doc, std::span<const Label> labels,
                      const CategoryDistribution &dist, double spurious_rate,
                      std::uint64_t seed);

struct TrainingDocument {
  Document document;
  std::vector<Annotation> annotations;
};

// Pluggable pre-annotation engine.
class MlUnit {
 public:
  virtual ~MlUnit() = default;

  virtual void train(std::span<const TrainingDocument> annotated) = 0;

  // Deterministic for a fixed unit state and document.
  virtual std::vector<PreAnnotation> predict(const Document &doc) const = 0;

  virtual bool supports_training() const { return true; }
};

// Stand-in for a trained model: pre-annotations are degraded gold at a fixed
// recall. train() does nothing.
class SimulatedMlUnit : public MlUnit {
 public:
  SimulatedMlUnit(std::vector<Label> labels,
                  std::span<const Document> hidden_gold, double target_recall,
                  std::uint64_t corpus_seed);

  void train(std::span<const TrainingDocument>) override {}
  std::vector<PreAnnotation> predict(const Document &doc) const override;
  bool supports_training() const override { return false; }

  // Same as predict() but keeps the substitution notes.
  DegradeResult predict_with_notes(const Document &doc) const;

  double target_recall() const { return target_recall_; }
  const ScaledDistribution &distribution() const { return dist_; }

 private:
  std::vector<Label> labels_;
  std::map<std::string, std::optional<std::vector<GoldAnnotation>>, std::less<>>
      gold_;
  double target_recall_;
  ScaledDistribution dist_;
  std::uint64_t corpus_seed_;
};

std::unique_ptr<SimulatedMlUnit> simulated_ml_unit(
    const Corpus &hidden_gold, double target_recall, std::uint64_t corpus_seed);

// Seed used by SimulatedMlUnit for one document.
std::uint64_t document_seed(std::uint64_t corpus_seed,
                            std::string_view document_id);

// Exchange format:
//   {"document_id", "annotations": [{"start_token","end_token","label",
//                                    "confidence"}]}
// intended_category is written only when include_intended is set.
nlohmann::json pre_annotations_to_json(std::string_view document_id,
                                       std::span<const PreAnnotation> pre,
                                       bool include_intended);

struct PreAnnotatedDocument {
  std::string document_id;
  std::vector<PreAnnotation> annotations;
};

// Parses the exchange format. "confidence" defaults to 1 when absent.
// Throws ParseError.
PreAnnotatedDocument pre_annotations_from_json(const nlohmann::json &j);

}  // namespace annocycle

#endif  // ANNOCYCLE_ASSISTANCE_H_

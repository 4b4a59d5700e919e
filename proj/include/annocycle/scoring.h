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

#ifndef ANNOCYCLE_SCORING_H_
#define ANNOCYCLE_SCORING_H_

#include <array>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "annocycle/assistance.h"
#include "annocycle/corpus.h"
#include "json.hpp"

namespace annocycle {

class CategoryCounts {
 public:
  std::size_t &operator[](ErrorCategory c) { return n_[index_of(c)]; }
  std::size_t operator[](ErrorCategory c) const { return n_[index_of(c)]; }

  CategoryCounts &operator+=(const CategoryCounts &other);

  // Correct + CLWS + WLCS + WLWS + Missing.
  std::size_t gold_total() const;
  // Correct + CLWS + WLCS + WLWS + Unnecessary.
  std::size_t produced_total() const;

  bool operator==(const CategoryCounts &) const = default;

 private:
  std::array<std::size_t, kNumCategories> n_{};
};

// One row of a classification. Unnecessary rows have no gold, Missing rows
// have no produced annotation.
struct Match {
  std::optional<std::size_t> produced_index;
  std::optional<std::size_t> gold_index;
  std::optional<Annotation> produced;
  std::optional<Annotation> gold;
  ErrorCategory category;
};

struct Classification {
  std::vector<Match> matches;
  CategoryCounts counts;
};

// One-to-one matching of produced annotations against gold:
//   1. identical spans (Correct / WrongLabelCorrectSpan);
//   2. remaining overlapping pairs, greedily by descending token overlap,
//      ties to the leftmost gold then the shortest produced span
//      (CorrectLabelWrongSpan / WrongLabelWrongSpan);
//   3. leftovers (Unnecessary / Missing).
// Throws InputError when either list overlaps itself.
Classification classify(std::span<const Annotation> produced,
                        std::span<const Annotation> gold);

struct SampleStats {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;  // n - 1 denominator; 0 for n == 1
};

// Throws InsufficientDataError for an empty sample.
SampleStats sample_stats(std::span<const double> values);

struct MetricsReport {
  CategoryCounts counts;
  std::size_t gold_count = 0;
  std::size_t produced_count = 0;
  double percent_correct = 0.0;
  std::size_t missing_count = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<SampleStats> seconds_per_correct_annotation;
};

// timings: seconds spent per correct annotation; empty means not measured.
// Throws DomainError when gold_count is 0 and InputError when counts claim
// more gold entities than gold_count.
MetricsReport metrics(const CategoryCounts &counts, std::size_t gold_count,
                      std::span<const double> timings = {});
MetricsReport metrics(const Classification &cls, std::size_t gold_count,
                      std::span<const double> timings = {});

struct TTestResult {
  std::size_t n = 0;
  double mean_diff = 0.0;
  double sd = 0.0;
  double t = 0.0;
  std::size_t df = 0;
  double p_two_tailed = 1.0;
};

// Two-tailed one-sample t-test of mean(diffs) against 0.
TTestResult one_sample_ttest(std::span<const double> diffs);

// Two-tailed p-value of a t statistic.
double student_t_two_tailed_p(double t, double df);

// Workdays of annotation effort: count * seconds / 3600 / hours_per_day.
double cost_projection(double annotation_count, double seconds_per_annotation,
                       double hours_per_day = 8.0);

struct DimensionComparison {
  std::string name;
  std::size_t n = 0;
  double mean_diff = 0.0;  // assisted - unassisted
  double standard_error = 0.0;
  std::optional<TTestResult> ttest;
  std::optional<std::string> note;
};

struct ConditionReport {
  std::size_t annotators = 0;
  // percent_correct, missing_count, seconds_per_correct_annotation.
  std::vector<DimensionComparison> dimensions;
  // 1 - sum(missing assisted) / sum(missing unassisted); absent when the
  // unassisted total is 0.
  std::optional<double> missing_reduction_pooled;
  // Mean of per-annotator reductions over annotators with unassisted
  // missing > 0.
  std::optional<double> missing_reduction_per_annotator;
};

// Per-annotator assisted-minus-unassisted differences with one-sample
// t-tests. Requires at least two annotators and equal-length inputs.
ConditionReport compare_conditions(std::span<const MetricsReport> assisted,
                                   std::span<const MetricsReport> unassisted);

// Same differences without the two-annotator requirement; t-tests are
// attached only where n >= 2.
ConditionReport condition_differences(std::span<const MetricsReport> assisted,
                                      std::span<const MetricsReport> unassisted);

// Scoring of one document for one annotator.
struct ScoringInput {
  std::string document_id;
  std::string annotator_id;
  std::vector<Annotation> produced;
  std::vector<Annotation> gold;
  // Seconds per produced annotation, parallel to `produced`, or empty.
  std::vector<std::optional<double>> produced_seconds;
};

struct DocumentScore {
  std::string document_id;
  std::string annotator_id;
  Classification classification;
  std::optional<MetricsReport> metrics;  // absent when the doc has no gold
  std::vector<double> correct_seconds;
};

struct ScoreSummary {
  std::vector<DocumentScore> per_document;
  CategoryCounts counts;
  std::size_t gold_count = 0;
  std::vector<double> correct_seconds;

  // Pooled metrics; nullopt when gold_count is 0.
  std::optional<MetricsReport> aggregate() const;
};

DocumentScore score_document(const ScoringInput &input);
ScoreSummary score_documents(std::span<const ScoringInput> inputs);

nlohmann::json counts_to_json(const CategoryCounts &counts);
nlohmann::json metrics_to_json(const MetricsReport &m);
nlohmann::json classification_to_json(const Classification &cls);
nlohmann::json ttest_to_json(const TTestResult &t);
nlohmann::json condition_report_to_json(const ConditionReport &r);

// {"per_document": [...], "aggregate": {...}, "ttests": {...}}
nlohmann::json score_report_to_json(const ScoreSummary &summary,
                                    const std::optional<ConditionReport> &cmp);

// Header row plus one row per (document, annotator).
void write_score_csv(std::ostream &out, const ScoreSummary &summary);

}  // namespace annocycle

#endif  // ANNOCYCLE_SCORING_H_

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

#ifndef ANNOCYCLE_WORKCYCLE_H_
#define ANNOCYCLE_WORKCYCLE_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "annocycle/assistance.h"
#include "annocycle/corpus.h"
#include "annocycle/scoring.h"
#include "annocycle/timestamp.h"
#include "json.hpp"

namespace annocycle {

// ---------------------------------------------------------------------------
// Annotation sets

enum class ActionType { kAdd, kDelete, kRelabel, kReplace, kAccept };

std::string_view action_name(ActionType t);
std::optional<ActionType> parse_action(std::string_view name);

struct AnnotationAction {
  ActionType type = ActionType::kAdd;
  TokenSpan span;
  std::string label;
  Timestamp at;

  bool operator==(const AnnotationAction &) const = default;
};

// One annotator's finished work on one document.
struct AnnotationSet {
  std::string document_id;
  std::string annotator_id;
  std::vector<Annotation> annotations;
  Timestamp started_at;
  Timestamp finished_at;
  std::vector<AnnotationAction> actions;  // time-ordered

  bool operator==(const AnnotationSet &) const = default;
};

// Throws InputError on overlapping spans, spans outside the document,
// unknown labels, finished_at < started_at, or out-of-order actions.
void validate_annotation_set(const AnnotationSet &set, const Document &doc,
                             std::span<const Label> labels);

// Seconds spent on each annotation, parallel to set.annotations. An
// annotation's time is the duration of the last action (add, replace,
// relabel, accept) that produced it; action durations are the gaps between
// consecutive timestamps, starting at started_at. nullopt if no action.
std::vector<std::optional<double>> annotation_seconds(const AnnotationSet &set);

nlohmann::json annotation_set_to_json(const AnnotationSet &set);
// Spans may be given as start_token/end_token or as start_char/end_char
// (aligned against doc). Throws ParseError / AlignmentError.
AnnotationSet annotation_set_from_json(const nlohmann::json &j,
                                       const Document &doc);

// ---------------------------------------------------------------------------
// Work cycle

enum class SelectionKind { kSequential, kRandom, kLeastConfidence };

struct SelectionStrategy {
  SelectionKind kind = SelectionKind::kSequential;
  std::uint64_t seed = 0;  // random only

  static SelectionStrategy sequential() { return {SelectionKind::kSequential, 0}; }
  static SelectionStrategy random(std::uint64_t seed) {
    return {SelectionKind::kRandom, seed};
  }
  static SelectionStrategy least_confidence() {
    return {SelectionKind::kLeastConfidence, 0};
  }
  bool operator==(const SelectionStrategy &) const = default;
};

std::string_view strategy_name(SelectionKind kind);
// Throws InputError for an unknown name.
SelectionStrategy parse_strategy(std::string_view name, std::uint64_t seed = 0);

struct IterationPlan {
  std::size_t iteration_index = 0;
  std::vector<std::string> document_ids;
  std::map<std::string, std::vector<PreAnnotation>> pre_annotations;
  SelectionStrategy strategy;

  bool operator==(const IterationPlan &) const = default;
};

struct SimulatedBinding {
  double target_recall = 1.0;
  std::uint64_t seed = 0;
  bool operator==(const SimulatedBinding &) const = default;
};

struct ExternalBinding {
  std::string base_url;
  bool operator==(const ExternalBinding &) const = default;
};

using MlBinding = std::variant<SimulatedBinding, ExternalBinding>;

struct ProjectState {
  std::vector<Label> labels;
  std::vector<Document> corpus;
  std::map<std::string, AnnotationSet> annotated;
  std::optional<IterationPlan> pending;
  std::size_t iteration_counter = 0;
  MlBinding ml_unit;

  const Document *find_document(std::string_view id) const;
  bool is_annotated(std::string_view id) const;
  bool is_pending(std::string_view id) const;
  // Corpus order.
  std::vector<std::string> unannotated_ids() const;
  // Annotated documents with their merged annotations, corpus order.
  std::vector<TrainingDocument> training_set() const;

  bool operator==(const ProjectState &) const = default;
};

// Mean pre-annotation confidence; 0 for an empty list.
double document_confidence(std::span<const PreAnnotation> pre);

// Picks up to `size` documents that are neither annotated nor pending.
// least_confidence ranks by document_confidence of `unit` predictions,
// ascending, ties by corpus order; it needs a unit. Throws EmptyCorpusError
// when nothing is left, InputError for size 0.
std::vector<std::string> select_batch(const ProjectState &state,
                                      const SelectionStrategy &strategy,
                                      std::size_t size, const MlUnit *unit);

// Selects a batch and pre-annotates it with `unit`. Throws ConflictError
// when an iteration is pending; prediction failures surface as
// PredictionError naming the document.
std::pair<ProjectState, IterationPlan> open_iteration(
    ProjectState state, const SelectionStrategy &strategy, std::size_t size,
    const MlUnit &unit);

// Moves the pending documents to `annotated`, clears the plan, increments
// the counter and retrains `unit` (if given and trainable) on every
// annotated document. Submissions must cover the plan exactly, otherwise
// IncompleteIterationError lists the missing and unexpected ids.
ProjectState merge_back(ProjectState state,
                        std::span<const AnnotationSet> submissions,
                        MlUnit *unit);

// Ends the pending iteration early: submitted documents are merged, the rest
// return to the unannotated pool.
ProjectState complete_partial(ProjectState state,
                              std::span<const AnnotationSet> submissions,
                              MlUnit *unit);

// ---------------------------------------------------------------------------
// Experiment design

struct Condition {
  bool assisted = false;
  double target_recall = 0.0;  // meaningful when assisted

  static Condition none() { return {false, 0.0}; }
  static Condition with_assistance(double r) { return {true, r}; }
  bool operator==(const Condition &) const = default;
};

struct Block {
  std::string name;
  std::vector<std::string> document_ids;
  std::size_t entity_total = 0;
  Condition condition;

  bool operator==(const Block &) const = default;
};

enum class GroupOrder { kAssistedFirst, kUnassistedFirst };

std::string_view group_name(GroupOrder g);
GroupOrder parse_group(std::string_view name);

struct ExperimentPlan {
  std::vector<Block> blocks;
  std::optional<Block> training_block;
  GroupOrder group = GroupOrder::kAssistedFirst;
  std::uint64_t seed = 0;  // seeds the simulated pre-annotations

  bool operator==(const ExperimentPlan &) const = default;
};

// Balances gold-entity totals over k blocks with the longest-processing-time
// rule. Documents need gold. Throws DomainError for k == 0 or k > docs.
std::vector<Block> partition_blocks(std::span<const Document> docs,
                                    std::size_t k);

// k_blocks main blocks with alternating conditions; the first
// `training_documents` documents (corpus order) form an unassisted training
// block. Throws DomainError for odd k_blocks or empty docs.
ExperimentPlan plan_experiment(std::span<const Document> docs,
                               std::size_t k_blocks, GroupOrder order,
                               double target_recall,
                               std::size_t training_documents = 0,
                               std::uint64_t seed = 0);

// Throws InputError on unknown/duplicate documents or non-alternating
// conditions.
void validate_plan(const ExperimentPlan &plan, const Corpus &corpus);

nlohmann::json plan_to_json(const ExperimentPlan &plan);
ExperimentPlan plan_from_json(const nlohmann::json &j);

// ---------------------------------------------------------------------------
// Simulated annotator

struct AnnotatorBehavior {
  double p_fix_missing = 0.84;
  std::optional<double> p_fix_missing_assisted;  // defaults to p_fix_missing
  double p_fix_error = 0.84;
  double p_remove_spurious = 0.84;
  double seconds_mean = 8.2;
  double seconds_sd = 2.3;
  // Cost of accepting a pre-annotation relative to an edit action.
  double review_factor = 1.0;
  std::uint64_t seed = 0;

  // Throws DomainError.
  void validate() const;
  bool operator==(const AnnotatorBehavior &) const = default;
};

nlohmann::json behavior_to_json(const AnnotatorBehavior &b);
// Missing fields keep their defaults. Throws ParseError / DomainError.
AnnotatorBehavior behavior_from_json(const nlohmann::json &j);

struct AnnotationTask {
  const Document *document = nullptr;  // must carry gold
  std::vector<PreAnnotation> pre_annotations;
};

// Starts from the pre-annotations and edits them towards gold: errors are
// fixed with p_fix_error, unnecessary ones removed with p_remove_spurious,
// missed entities added with p_fix_missing. Every action takes a
// Normal(seconds_mean, seconds_sd) duration truncated below at 0.5 s (accepts
// are scaled by review_factor). Deterministic under behavior.seed.
std::vector<AnnotationSet> simulate_annotator(
    std::span<const AnnotationTask> tasks, const AnnotatorBehavior &behavior,
    bool assisted, const std::string &annotator_id, Timestamp start);

struct BlockResult {
  std::string annotator_id;
  std::string block;
  bool training = false;
  Condition condition;
  ScoreSummary summary;
  std::optional<MetricsReport> metrics;  // absent for a block without gold
};

struct AnnotatorResult {
  std::string annotator_id;
  std::optional<AnnotatorBehavior> behavior;  // absent for imported results
  std::optional<MetricsReport> assisted;
  std::optional<MetricsReport> unassisted;
};

struct ExperimentSubmission {
  std::string block;
  bool training = false;
  Condition condition;
  AnnotationSet set;

  bool operator==(const ExperimentSubmission &) const = default;
};

struct ExperimentReport {
  ExperimentPlan plan;
  std::vector<AnnotatorResult> annotators;
  std::vector<BlockResult> per_block;
  std::optional<ConditionReport> condition_comparison;
  std::vector<ExperimentSubmission> submissions;
};

// Simulates every annotator over every block, scores each block against
// gold, pools per condition and compares conditions across annotators.
ExperimentReport run_experiment(const ExperimentPlan &plan, const Corpus &corpus,
                                std::span<const AnnotatorBehavior> behaviors);

// Scores stored submissions block by block, annotators in order of first
// appearance; behaviors[i] describes the i-th annotator when known.
ExperimentReport rebuild_experiment_report(
    const ExperimentPlan &plan, const Corpus &corpus,
    std::span<const AnnotatorBehavior> behaviors,
    std::vector<ExperimentSubmission> submissions);

// Pools scored submissions per annotator and condition and compares them.
// Used both by run_experiment and to recompute from stored submissions.
std::optional<ConditionReport> compare_submissions(
    const Corpus &corpus, std::span<const ExperimentSubmission> submissions,
    std::vector<AnnotatorResult> *per_annotator = nullptr);

// {"plan", "annotators", "per_block", "condition_comparison"}
nlohmann::json experiment_report_to_json(const ExperimentReport &report);

nlohmann::json experiment_submission_to_json(const ExperimentSubmission &s);
ExperimentSubmission experiment_submission_from_json(const nlohmann::json &j,
                                                     const Corpus &corpus);

// Experiment config: a full plan ("blocks", "training_block"?, "group",
// "seed") or generator fields {"k_blocks", "group", "target_recall",
// "training_documents", "seed"} applied to `docs`. Throws ParseError /
// DomainError.
ExperimentPlan plan_from_config(const nlohmann::json &j,
                                std::span<const Document> docs);

// n annotators sharing `base`, each with its own seed. With spread > 0 every
// probability gets seeded Normal(0, spread) jitter, clamped to [0,1].
std::vector<AnnotatorBehavior> cohort_behaviors(const AnnotatorBehavior &base,
                                                std::size_t n, std::uint64_t seed,
                                                double spread = 0.0);

// Fixed start of the simulated clock.
Timestamp simulation_epoch();

}  // namespace annocycle

#endif  // ANNOCYCLE_WORKCYCLE_H_

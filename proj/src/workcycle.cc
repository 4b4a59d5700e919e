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

#include "annocycle/workcycle.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "annocycle/errors.h"
#include "annocycle/rng.h"

namespace annocycle {
namespace {

using nlohmann::json;
using E = ErrorCategory;

constexpr std::array<std::string_view, 5> kActionNames = {
    "add", "delete", "relabel", "replace", "accept"};

std::string span_text(TokenSpan s) {
  return "[" + std::to_string(s.begin) + "," + std::to_string(s.end) + ")";
}

TokenSpan span_from_json(const json &j, const Document &doc) {
  if (j.contains("start_token") || j.contains("end_token")) {
    const auto &b = j.at("start_token");
    const auto &e = j.at("end_token");
    if (!is_offset(b) || !is_offset(e)) {
      throw ParseError("token offsets must be non-negative integers");
    }
    return {b.get<std::size_t>(), e.get<std::size_t>()};
  }
  if (j.contains("start_char") || j.contains("end_char")) {
    const auto &b = j.at("start_char");
    const auto &e = j.at("end_char");
    if (!is_offset(b) || !is_offset(e)) {
      throw ParseError("char offsets must be non-negative integers");
    }
    return align_span(doc, {b.get<std::size_t>(), e.get<std::size_t>()});
  }
  throw ParseError("annotation needs start_token/end_token or "
                   "start_char/end_char");
}

json condition_to_json(const Condition &c) {
  if (!c.assisted) return {{"assisted", false}};
  return {{"assisted", true}, {"target_recall", c.target_recall}};
}

Condition condition_from_json(const json &j) {
  if (!j.at("assisted").get<bool>()) return Condition::none();
  const double r = j.at("target_recall").get<double>();
  if (!(r >= 0.0 && r <= 1.0)) throw ParseError("target_recall outside [0,1]");
  return Condition::with_assistance(r);
}

json block_to_json(const Block &b) {
  return {{"name", b.name},
          {"documents", b.document_ids},
          {"entity_total", b.entity_total},
          {"condition", condition_to_json(b.condition)}};
}

Block block_from_json(const json &j) {
  Block b;
  b.name = j.at("name").get<std::string>();
  b.document_ids = j.at("documents").get<std::vector<std::string>>();
  b.entity_total = j.value("entity_total", std::size_t{0});
  b.condition = condition_from_json(j.at("condition"));
  return b;
}

double draw_seconds(Rng &rng, const AnnotatorBehavior &b, double scale) {
  if (scale == 0.0) return 0.0;
  const double mean = b.seconds_mean * scale;
  const double sd = b.seconds_sd * scale;
  constexpr double kFloor = 0.5;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double x = rng.normal(mean, sd);
    if (x >= kFloor) return x;
  }
  return kFloor;
}

}  // namespace

// ---------------------------------------------------------------------------
// Annotation sets

std::string_view action_name(ActionType t) {
  return kActionNames[static_cast<std::size_t>(t)];
}

std::optional<ActionType> parse_action(std::string_view name) {
  for (std::size_t i = 0; i < kActionNames.size(); ++i)
    if (kActionNames[i] == name) return static_cast<ActionType>(i);
  return std::nullopt;
}

void validate_annotation_set(const AnnotationSet &set, const Document &doc,
                             std::span<const Label> labels) {
  if (set.document_id != doc.id) {
    throw InputError("annotation set is for document '" + set.document_id +
                     "', not '" + doc.id + "'");
  }
  if (set.annotator_id.empty()) throw InputError("annotator_id is empty");
  auto known = [&](const std::string &label) {
    return std::any_of(labels.begin(), labels.end(),
                       [&](const Label &l) { return l.id == label; });
  };
  auto check_span = [&](TokenSpan s) {
    if (s.empty() || s.end > doc.tokens.size()) {
      throw InputError("span " + span_text(s) + " outside document '" +
                       doc.id + "' (" + std::to_string(doc.tokens.size()) +
                       " tokens)");
    }
  };
  for (const auto &a : set.annotations) {
    check_span(a.span);
    if (!known(a.label)) throw InputError("unknown label '" + a.label + "'");
  }
  check_non_overlapping(set.annotations, "annotations");
  if (set.finished_at < set.started_at) {
    throw InputError("finished_at precedes started_at");
  }
  Timestamp prev = set.started_at;
  for (const auto &act : set.actions) {
    if (act.at < prev) throw InputError("actions are not time-ordered");
    prev = act.at;
    check_span(act.span);
    if (!known(act.label)) throw InputError("unknown label '" + act.label + "'");
  }
}

std::vector<std::optional<double>> annotation_seconds(const AnnotationSet &set) {
  std::vector<double> durations;
  Timestamp prev = set.started_at;
  for (const auto &a : set.actions) {
    durations.push_back(
        std::chrono::duration<double>(a.at - prev).count());
    prev = a.at;
  }
  std::vector<std::optional<double>> out;
  for (const auto &ann : set.annotations) {
    std::optional<double> seconds;
    for (std::size_t i = set.actions.size(); i-- > 0;) {
      const auto &act = set.actions[i];
      if (act.type == ActionType::kDelete) continue;
      if (act.span == ann.span && act.label == ann.label) {
        seconds = durations[i];
        break;
      }
    }
    out.push_back(seconds);
  }
  return out;
}

json annotation_set_to_json(const AnnotationSet &set) {
  json anns = json::array();
  for (const auto &a : set.annotations) {
    anns.push_back({{"start_token", a.span.begin},
                    {"end_token", a.span.end},
                    {"label", a.label}});
  }
  json actions = json::array();
  for (const auto &a : set.actions) {
    actions.push_back({{"type", action_name(a.type)},
                       {"start_token", a.span.begin},
                       {"end_token", a.span.end},
                       {"label", a.label},
                       {"at", format_timestamp(a.at)}});
  }
  return {{"document_id", set.document_id},
          {"annotator_id", set.annotator_id},
          {"annotations", std::move(anns)},
          {"started_at", format_timestamp(set.started_at)},
          {"finished_at", format_timestamp(set.finished_at)},
          {"actions", std::move(actions)}};
}

AnnotationSet annotation_set_from_json(const json &j, const Document &doc) {
  if (!j.is_object()) throw ParseError("annotation set must be an object");
  AnnotationSet set;
  try {
    set.document_id = j.value("document_id", doc.id);
    set.annotator_id = j.at("annotator_id").get<std::string>();
    for (const auto &a : j.at("annotations")) {
      set.annotations.push_back(
          {span_from_json(a, doc), a.at("label").get<std::string>()});
    }
    set.started_at = parse_timestamp(j.at("started_at").get<std::string>());
    set.finished_at = parse_timestamp(j.at("finished_at").get<std::string>());
    if (j.contains("actions")) {
      for (const auto &a : j.at("actions")) {
        const auto name = a.at("type").get<std::string>();
        const auto type = parse_action(name);
        if (!type) throw ParseError("unknown action type '" + name + "'");
        set.actions.push_back({*type, span_from_json(a, doc),
                               a.at("label").get<std::string>(),
                               parse_timestamp(a.at("at").get<std::string>())});
      }
    }
  } catch (const json::exception &e) {
    throw ParseError(std::string("annotation set: ") + e.what());
  }
  return set;
}

// ---------------------------------------------------------------------------
// Work cycle

std::string_view strategy_name(SelectionKind kind) {
  switch (kind) {
    case SelectionKind::kSequential:
      return "sequential";
    case SelectionKind::kRandom:
      return "random";
    case SelectionKind::kLeastConfidence:
      return "least_confidence";
  }
  return "sequential";
}

SelectionStrategy parse_strategy(std::string_view name, std::uint64_t seed) {
  if (name == "sequential") return SelectionStrategy::sequential();
  if (name == "random") return SelectionStrategy::random(seed);
  if (name == "least_confidence") return SelectionStrategy::least_confidence();
  throw InputError("unknown selection strategy '" + std::string(name) + "'");
}

const Document *ProjectState::find_document(std::string_view id) const {
  for (const auto &d : corpus)
    if (d.id == id) return &d;
  return nullptr;
}

bool ProjectState::is_annotated(std::string_view id) const {
  return annotated.find(std::string(id)) != annotated.end();
}

bool ProjectState::is_pending(std::string_view id) const {
  return pending && std::find(pending->document_ids.begin(),
                              pending->document_ids.end(),
                              id) != pending->document_ids.end();
}

std::vector<std::string> ProjectState::unannotated_ids() const {
  std::vector<std::string> ids;
  for (const auto &d : corpus)
    if (!is_annotated(d.id) && !is_pending(d.id)) ids.push_back(d.id);
  return ids;
}

std::vector<TrainingDocument> ProjectState::training_set() const {
  std::vector<TrainingDocument> out;
  for (const auto &d : corpus) {
    auto it = annotated.find(d.id);
    if (it != annotated.end()) out.push_back({d, it->second.annotations});
  }
  return out;
}

double document_confidence(std::span<const PreAnnotation> pre) {
  if (pre.empty()) return 0.0;
  double sum = 0.0;
  for (const auto &p : pre) sum += p.confidence;
  return sum / static_cast<double>(pre.size());
}

namespace {

std::vector<PreAnnotation> predict_or_throw(const MlUnit &unit,
                                            const Document &doc) {
  try {
    return unit.predict(doc);
  } catch (const PredictionError &) {
    throw;
  } catch (const std::exception &e) {
    throw PredictionError(doc.id, e.what());
  }
}

}  // namespace

std::vector<std::string> select_batch(const ProjectState &state,
                                      const SelectionStrategy &strategy,
                                      std::size_t size, const MlUnit *unit) {
  if (size == 0) throw InputError("batch size must be at least 1");
  std::vector<std::string> ids = state.unannotated_ids();
  if (ids.empty()) throw EmptyCorpusError("no unannotated documents left");
  const std::size_t take = std::min(size, ids.size());

  switch (strategy.kind) {
    case SelectionKind::kSequential:
      break;
    case SelectionKind::kRandom: {
      Rng rng(strategy.seed);
      for (std::size_t i = 0; i < take; ++i) {
        const std::size_t j = i + rng.below(ids.size() - i);
        std::swap(ids[i], ids[j]);
      }
      break;
    }
    case SelectionKind::kLeastConfidence: {
      if (!unit) throw InputError("least_confidence selection needs an ML unit");
      std::vector<std::pair<double, std::size_t>> scored;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto pre = predict_or_throw(*unit, *state.find_document(ids[i]));
        scored.emplace_back(document_confidence(pre), i);
      }
      std::stable_sort(scored.begin(), scored.end(),
                       [](const auto &a, const auto &b) { return a.first < b.first; });
      std::vector<std::string> ranked;
      for (const auto &[score, i] : scored) ranked.push_back(ids[i]);
      ids = std::move(ranked);
      break;
    }
  }
  ids.resize(take);
  return ids;
}

std::pair<ProjectState, IterationPlan> open_iteration(
    ProjectState state, const SelectionStrategy &strategy, std::size_t size,
    const MlUnit &unit) {
  if (state.pending) {
    throw ConflictError("iteration " +
                        std::to_string(state.pending->iteration_index) +
                        " is still pending");
  }
  IterationPlan plan;
  plan.iteration_index = state.iteration_counter;
  plan.strategy = strategy;
  plan.document_ids = select_batch(state, strategy, size, &unit);
  for (const auto &id : plan.document_ids) {
    plan.pre_annotations[id] = predict_or_throw(unit, *state.find_document(id));
  }
  state.pending = plan;
  return {std::move(state), std::move(plan)};
}

namespace {

void retrain(const ProjectState &state, MlUnit *unit) {
  if (unit && unit->supports_training()) {
    const auto examples = state.training_set();
    unit->train(examples);
  }
}

}  // namespace

ProjectState merge_back(ProjectState state,
                        std::span<const AnnotationSet> submissions,
                        MlUnit *unit) {
  if (!state.pending) throw ConflictError("no pending iteration");
  const auto &planned = state.pending->document_ids;
  std::set<std::string> seen;
  std::vector<std::string> missing, unexpected;
  for (const auto &s : submissions) {
    if (!state.is_pending(s.document_id) || !seen.insert(s.document_id).second) {
      unexpected.push_back(s.document_id);
    }
  }
  for (const auto &id : planned)
    if (!seen.count(id)) missing.push_back(id);
  if (!missing.empty() || !unexpected.empty()) {
    std::string msg = "submissions do not cover the pending iteration";
    for (const auto &id : missing) msg += "; missing '" + id + "'";
    for (const auto &id : unexpected) msg += "; unexpected '" + id + "'";
    throw IncompleteIterationError(msg, std::move(missing),
                                   std::move(unexpected));
  }
  for (const auto &s : submissions) state.annotated[s.document_id] = s;
  state.pending.reset();
  ++state.iteration_counter;
  retrain(state, unit);
  return state;
}

ProjectState complete_partial(ProjectState state,
                              std::span<const AnnotationSet> submissions,
                              MlUnit *unit) {
  if (!state.pending) throw ConflictError("no pending iteration");
  std::set<std::string> seen;
  std::vector<std::string> unexpected;
  for (const auto &s : submissions) {
    if (!state.is_pending(s.document_id) || !seen.insert(s.document_id).second)
      unexpected.push_back(s.document_id);
  }
  if (!unexpected.empty()) {
    std::string msg = "submissions outside the pending iteration";
    for (const auto &id : unexpected) msg += "; unexpected '" + id + "'";
    throw IncompleteIterationError(msg, {}, std::move(unexpected));
  }
  for (const auto &s : submissions) state.annotated[s.document_id] = s;
  state.pending.reset();
  ++state.iteration_counter;
  if (!submissions.empty()) retrain(state, unit);
  return state;
}

// ---------------------------------------------------------------------------
// Experiment design

std::string_view group_name(GroupOrder g) {
  return g == GroupOrder::kAssistedFirst ? "assisted_first" : "unassisted_first";
}

GroupOrder parse_group(std::string_view name) {
  if (name == "assisted_first") return GroupOrder::kAssistedFirst;
  if (name == "unassisted_first") return GroupOrder::kUnassistedFirst;
  throw InputError("unknown group order '" + std::string(name) + "'");
}

std::vector<Block> partition_blocks(std::span<const Document> docs,
                                    std::size_t k) {
  if (k == 0) throw DomainError("block count must be at least 1");
  if (k > docs.size()) {
    throw DomainError("cannot split " + std::to_string(docs.size()) +
                      " documents into " + std::to_string(k) + " blocks");
  }
  std::vector<std::size_t> order(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (!docs[i].gold) {
      throw DomainError("document '" + docs[i].id + "' has no gold");
    }
    order[i] = i;
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto na = docs[a].gold->size(), nb = docs[b].gold->size();
    if (na != nb) return na > nb;
    return docs[a].id < docs[b].id;
  });

  std::vector<Block> blocks(k);
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i : order) {
    std::size_t best = 0;
    for (std::size_t b = 1; b < k; ++b)
      if (blocks[b].entity_total < blocks[best].entity_total) best = b;
    blocks[best].entity_total += docs[i].gold->size();
    members[best].push_back(i);
  }
  for (std::size_t b = 0; b < k; ++b) {
    std::sort(members[b].begin(), members[b].end());
    blocks[b].name = "block-" + std::to_string(b + 1);
    for (std::size_t i : members[b]) blocks[b].document_ids.push_back(docs[i].id);
  }
  return blocks;
}

ExperimentPlan plan_experiment(std::span<const Document> docs,
                               std::size_t k_blocks, GroupOrder order,
                               double target_recall,
                               std::size_t training_documents,
                               std::uint64_t seed) {
  if (docs.empty()) throw DomainError("experiment needs documents");
  if (k_blocks == 0 || k_blocks % 2 != 0) {
    throw DomainError("alternating conditions need an even block count, got " +
                      std::to_string(k_blocks));
  }
  if (!(target_recall >= 0.0 && target_recall <= 1.0)) {
    throw DomainError("target recall outside [0,1]");
  }
  if (training_documents >= docs.size()) {
    throw DomainError("training block would leave no experiment documents");
  }
  ExperimentPlan plan;
  plan.group = order;
  plan.seed = seed;
  if (training_documents > 0) {
    Block training;
    training.name = "training";
    training.condition = Condition::none();
    for (std::size_t i = 0; i < training_documents; ++i) {
      if (!docs[i].gold) throw DomainError("document '" + docs[i].id + "' has no gold");
      training.document_ids.push_back(docs[i].id);
      training.entity_total += docs[i].gold->size();
    }
    plan.training_block = std::move(training);
  }
  plan.blocks = partition_blocks(docs.subspan(training_documents), k_blocks);
  for (std::size_t b = 0; b < plan.blocks.size(); ++b) {
    const bool assisted = (b % 2 == 0) == (order == GroupOrder::kAssistedFirst);
    plan.blocks[b].condition = assisted ? Condition::with_assistance(target_recall)
                                        : Condition::none();
  }
  return plan;
}

void validate_plan(const ExperimentPlan &plan, const Corpus &corpus) {
  if (plan.blocks.empty()) throw InputError("plan has no blocks");
  std::set<std::string> seen;
  auto check_block = [&](const Block &b) {
    for (const auto &id : b.document_ids) {
      const Document *d = corpus.find_document(id);
      if (!d) throw InputError("block '" + b.name + "': unknown document '" + id + "'");
      if (!d->gold) throw InputError("block '" + b.name + "': document '" + id + "' has no gold");
      if (!seen.insert(id).second) {
        throw InputError("document '" + id + "' appears in more than one block");
      }
    }
  };
  if (plan.training_block) check_block(*plan.training_block);
  for (std::size_t i = 0; i < plan.blocks.size(); ++i) {
    check_block(plan.blocks[i]);
    if (i > 0 && plan.blocks[i].condition.assisted ==
                     plan.blocks[i - 1].condition.assisted) {
      throw InputError("conditions of blocks '" + plan.blocks[i - 1].name +
                       "' and '" + plan.blocks[i].name + "' do not alternate");
    }
  }
}

json plan_to_json(const ExperimentPlan &plan) {
  json blocks = json::array();
  for (const auto &b : plan.blocks) blocks.push_back(block_to_json(b));
  return {{"group", group_name(plan.group)},
          {"seed", plan.seed},
          {"training_block",
           plan.training_block ? block_to_json(*plan.training_block) : json(nullptr)},
          {"blocks", std::move(blocks)}};
}

ExperimentPlan plan_from_json(const json &j) {
  ExperimentPlan plan;
  try {
    plan.group = parse_group(j.value("group", std::string("assisted_first")));
    plan.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("training_block") && !j["training_block"].is_null()) {
      plan.training_block = block_from_json(j["training_block"]);
    }
    for (const auto &b : j.at("blocks")) plan.blocks.push_back(block_from_json(b));
  } catch (const json::exception &e) {
    throw ParseError(std::string("experiment plan: ") + e.what());
  } catch (const InputError &e) {
    throw ParseError(std::string("experiment plan: ") + e.what());
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Simulated annotator

void AnnotatorBehavior::validate() const {
  auto prob = [](const char *name, double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw DomainError(std::string(name) + " outside [0,1]");
    }
  };
  prob("p_fix_missing", p_fix_missing);
  if (p_fix_missing_assisted) prob("p_fix_missing_assisted", *p_fix_missing_assisted);
  prob("p_fix_error", p_fix_error);
  prob("p_remove_spurious", p_remove_spurious);
  if (!(seconds_mean > 0.0)) throw DomainError("seconds_mean must be > 0");
  if (!(seconds_sd >= 0.0)) throw DomainError("seconds_sd must be >= 0");
  if (!(review_factor >= 0.0)) throw DomainError("review_factor must be >= 0");
}

json behavior_to_json(const AnnotatorBehavior &b) {
  return {{"p_fix_missing", b.p_fix_missing},
          {"p_fix_missing_assisted",
           b.p_fix_missing_assisted ? json(*b.p_fix_missing_assisted) : json(nullptr)},
          {"p_fix_error", b.p_fix_error},
          {"p_remove_spurious", b.p_remove_spurious},
          {"seconds_mean", b.seconds_mean},
          {"seconds_sd", b.seconds_sd},
          {"review_factor", b.review_factor},
          {"seed", b.seed}};
}

AnnotatorBehavior behavior_from_json(const json &j) {
  AnnotatorBehavior b;
  try {
    b.p_fix_missing = j.value("p_fix_missing", b.p_fix_missing);
    if (j.contains("p_fix_missing_assisted") && !j["p_fix_missing_assisted"].is_null())
      b.p_fix_missing_assisted = j["p_fix_missing_assisted"].get<double>();
    b.p_fix_error = j.value("p_fix_error", b.p_fix_error);
    b.p_remove_spurious = j.value("p_remove_spurious", b.p_remove_spurious);
    b.seconds_mean = j.value("seconds_mean", b.seconds_mean);
    b.seconds_sd = j.value("seconds_sd", b.seconds_sd);
    b.review_factor = j.value("review_factor", b.review_factor);
    b.seed = j.value("seed", b.seed);
  } catch (const json::exception &e) {
    throw ParseError(std::string("annotator behavior: ") + e.what());
  }
  b.validate();
  return b;
}

ExperimentPlan plan_from_config(const json &j, std::span<const Document> docs) {
  if (!j.is_object()) throw ParseError("experiment config must be an object");
  if (j.contains("blocks")) return plan_from_json(j);
  try {
    return plan_experiment(docs, j.value("k_blocks", std::size_t{4}),
                           parse_group(j.value("group", std::string("assisted_first"))),
                           j.at("target_recall").get<double>(),
                           j.value("training_documents", std::size_t{0}),
                           j.value("seed", std::uint64_t{0}));
  } catch (const json::exception &e) {
    throw ParseError(std::string("experiment config: ") + e.what());
  } catch (const InputError &e) {
    throw ParseError(std::string("experiment config: ") + e.what());
  }
}

std::vector<AnnotatorBehavior> cohort_behaviors(const AnnotatorBehavior &base,
                                                std::size_t n, std::uint64_t seed,
                                                double spread) {
  if (!(spread >= 0.0)) throw DomainError("spread must be >= 0");
  std::vector<AnnotatorBehavior> out;
  for (std::size_t i = 0; i < n; ++i) {
    AnnotatorBehavior b = base;
    b.seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    if (spread > 0.0) {
      Rng rng(derive_seed(b.seed, "spread"));
      auto jitter = [&](double p) { return std::clamp(p + rng.normal(0.0, spread), 0.0, 1.0); };
      b.p_fix_missing = jitter(b.p_fix_missing);
      if (b.p_fix_missing_assisted) b.p_fix_missing_assisted = jitter(*b.p_fix_missing_assisted);
      b.p_fix_error = jitter(b.p_fix_error);
      b.p_remove_spurious = jitter(b.p_remove_spurious);
    }
    out.push_back(b);
  }
  return out;
}

std::vector<AnnotationSet> simulate_annotator(
    std::span<const AnnotationTask> tasks, const AnnotatorBehavior &behavior,
    bool assisted, const std::string &annotator_id, Timestamp start) {
  behavior.validate();
  const double p_missing = assisted && behavior.p_fix_missing_assisted
                               ? *behavior.p_fix_missing_assisted
                               : behavior.p_fix_missing;
  std::vector<AnnotationSet> out;
  Timestamp clock = start;

  for (const auto &task : tasks) {
    const Document &doc = *task.document;
    if (!doc.gold) throw InputError("document '" + doc.id + "' has no gold");
    const auto &gold = *doc.gold;
    std::vector<Annotation> pre;
    for (const auto &p : task.pre_annotations) pre.push_back(p.annotation);
    const Classification cls = classify(pre, gold);

    Rng rng(derive_seed(behavior.seed, doc.id));
    AnnotationSet set;
    set.document_id = doc.id;
    set.annotator_id = annotator_id;
    set.started_at = clock;
    double elapsed = 0.0;
    auto log = [&](ActionType type, const Annotation &a, double seconds) {
      elapsed += seconds;
      set.actions.push_back(
          {type, a.span, a.label,
           clock + std::chrono::milliseconds(std::llround(elapsed * 1000.0))});
    };

    // Working list; slot i starts as pre-annotation i.
    std::vector<std::optional<Annotation>> produced(pre.begin(), pre.end());
    std::vector<Annotation> placed;
    auto place = [&](const Annotation &a) {
      for (auto &p : produced)
        if (p && p->span.overlaps(a.span)) p.reset();
      std::erase_if(placed, [&](const Annotation &x) { return x.span.overlaps(a.span); });
      placed.push_back(a);
    };

    struct Deferred {
      Annotation gold;
      double p;
    };
    std::vector<Deferred> deferred;

    for (const auto &m : cls.matches) {
      if (!m.produced_index) {
        deferred.push_back({*m.gold, p_missing});
        continue;
      }
      auto &slot = produced[*m.produced_index];
      if (!slot) {
        // Displaced by an earlier correction.
        if (m.gold) deferred.push_back({*m.gold, behavior.p_fix_error});
        continue;
      }
      switch (m.category) {
        case E::kCorrect:
          log(ActionType::kAccept, *slot, draw_seconds(rng, behavior, behavior.review_factor));
          break;
        case E::kCorrectLabelWrongSpan:
        case E::kWrongLabelCorrectSpan:
        case E::kWrongLabelWrongSpan:
          if (rng.bernoulli(behavior.p_fix_error)) {
            const ActionType type = m.category == E::kWrongLabelCorrectSpan
                                        ? ActionType::kRelabel
                                        : ActionType::kReplace;
            slot.reset();
            place(*m.gold);
            log(type, *m.gold, draw_seconds(rng, behavior, 1.0));
          } else {
            log(ActionType::kAccept, *slot,
                draw_seconds(rng, behavior, behavior.review_factor));
          }
          break;
        case E::kUnnecessary:
          if (rng.bernoulli(behavior.p_remove_spurious)) {
            const Annotation removed = *slot;
            slot.reset();
            log(ActionType::kDelete, removed, draw_seconds(rng, behavior, 1.0));
          } else {
            log(ActionType::kAccept, *slot,
                draw_seconds(rng, behavior, behavior.review_factor));
          }
          break;
        case E::kMissing:
          break;
      }
    }
    for (const auto &d : deferred) {
      if (rng.bernoulli(d.p)) {
        place(d.gold);
        log(ActionType::kAdd, d.gold, draw_seconds(rng, behavior, 1.0));
      }
    }

    for (const auto &p : produced)
      if (p) set.annotations.push_back(*p);
    set.annotations.insert(set.annotations.end(), placed.begin(), placed.end());
    std::sort(set.annotations.begin(), set.annotations.end());
    set.finished_at = set.actions.empty() ? clock : set.actions.back().at;
    clock = set.finished_at;
    out.push_back(std::move(set));
  }
  return out;
}

Timestamp simulation_epoch() {
  using namespace std::chrono;
  return time_point_cast<milliseconds>(sys_days{year{2026} / 1 / 1});
}

namespace {

struct Pool {
  std::vector<ScoringInput> assisted, unassisted;
};

ScoringInput scoring_input(const Corpus &corpus, const ExperimentSubmission &s) {
  const Document *doc = corpus.find_document(s.set.document_id);
  if (!doc || !doc->gold) {
    throw InputError("submission for unknown or gold-less document '" +
                     s.set.document_id + "'");
  }
  return {s.set.document_id, s.set.annotator_id, s.set.annotations, *doc->gold,
          annotation_seconds(s.set)};
}

// Training block first, then the plan's blocks.
std::vector<std::pair<const Block *, bool>> schedule(const ExperimentPlan &plan) {
  std::vector<std::pair<const Block *, bool>> out;
  if (plan.training_block) out.emplace_back(&*plan.training_block, true);
  for (const auto &b : plan.blocks) out.emplace_back(&b, false);
  return out;
}

}  // namespace

std::optional<ConditionReport> compare_submissions(
    const Corpus &corpus, std::span<const ExperimentSubmission> submissions,
    std::vector<AnnotatorResult> *per_annotator) {
  std::vector<std::string> order;
  std::map<std::string, Pool> pools;
  for (const auto &s : submissions) {
    if (s.training) continue;
    if (!pools.count(s.set.annotator_id)) order.push_back(s.set.annotator_id);
    auto &pool = pools[s.set.annotator_id];
    (s.condition.assisted ? pool.assisted : pool.unassisted)
        .push_back(scoring_input(corpus, s));
  }
  std::vector<MetricsReport> assisted, unassisted;
  for (const auto &id : order) {
    const auto &pool = pools[id];
    const auto a = score_documents(pool.assisted).aggregate();
    const auto u = score_documents(pool.unassisted).aggregate();
    if (per_annotator) {
      auto it = std::find_if(per_annotator->begin(), per_annotator->end(),
                             [&](const AnnotatorResult &r) { return r.annotator_id == id; });
      if (it == per_annotator->end()) {
        per_annotator->push_back({id, {}, {}, {}});
        it = std::prev(per_annotator->end());
      }
      it->assisted = a;
      it->unassisted = u;
    }
    if (a && u) {
      assisted.push_back(*a);
      unassisted.push_back(*u);
    }
  }
  if (assisted.empty()) return std::nullopt;
  return condition_differences(assisted, unassisted);
}

ExperimentReport run_experiment(const ExperimentPlan &plan, const Corpus &corpus,
                                std::span<const AnnotatorBehavior> behaviors) {
  if (behaviors.empty()) throw InputError("experiment needs at least one annotator");
  validate_plan(plan, corpus);
  for (const auto &b : behaviors) b.validate();

  std::map<double, std::unique_ptr<SimulatedMlUnit>> units;
  auto unit_for = [&](double r) -> const SimulatedMlUnit & {
    auto &u = units[r];
    if (!u) u = simulated_ml_unit(corpus, r, plan.seed);
    return *u;
  };

  std::vector<ExperimentSubmission> submissions;
  for (std::size_t i = 0; i < behaviors.size(); ++i) {
    char id_buf[32];
    std::snprintf(id_buf, sizeof id_buf, "annotator-%02zu", i + 1);
    const std::string annotator_id = id_buf;

    Timestamp clock = simulation_epoch();
    for (const auto &[block, training] : schedule(plan)) {
      std::vector<AnnotationTask> tasks;
      for (const auto &id : block->document_ids) {
        AnnotationTask task{corpus.find_document(id), {}};
        if (block->condition.assisted) {
          task.pre_annotations =
              unit_for(block->condition.target_recall).predict(*task.document);
        }
        tasks.push_back(std::move(task));
      }
      auto sets = simulate_annotator(tasks, behaviors[i],
                                     block->condition.assisted, annotator_id, clock);
      if (!sets.empty()) clock = sets.back().finished_at;
      for (auto &set : sets)
        submissions.push_back({block->name, training, block->condition, std::move(set)});
    }
  }
  return rebuild_experiment_report(plan, corpus, behaviors, std::move(submissions));
}

ExperimentReport rebuild_experiment_report(
    const ExperimentPlan &plan, const Corpus &corpus,
    std::span<const AnnotatorBehavior> behaviors,
    std::vector<ExperimentSubmission> submissions) {
  ExperimentReport report;
  report.plan = plan;

  std::vector<std::string> order;
  for (const auto &s : submissions) {
    if (std::find(order.begin(), order.end(), s.set.annotator_id) == order.end())
      order.push_back(s.set.annotator_id);
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    AnnotatorResult a;
    a.annotator_id = order[i];
    if (i < behaviors.size()) a.behavior = behaviors[i];
    report.annotators.push_back(std::move(a));
  }

  for (const auto &annotator : order) {
    for (const auto &[block, training] : schedule(plan)) {
      std::vector<ScoringInput> inputs;
      for (const auto &s : submissions) {
        if (s.set.annotator_id == annotator && s.block == block->name)
          inputs.push_back(scoring_input(corpus, s));
      }
      if (inputs.empty()) continue;
      BlockResult result;
      result.annotator_id = annotator;
      result.block = block->name;
      result.training = training;
      result.condition = block->condition;
      result.summary = score_documents(inputs);
      result.metrics = result.summary.aggregate();
      report.per_block.push_back(std::move(result));
    }
  }
  report.condition_comparison =
      compare_submissions(corpus, submissions, &report.annotators);
  report.submissions = std::move(submissions);
  return report;
}

json experiment_report_to_json(const ExperimentReport &report) {
  auto opt_metrics = [](const std::optional<MetricsReport> &m) -> json {
    return m ? metrics_to_json(*m) : json(nullptr);
  };
  json annotators = json::array();
  for (const auto &a : report.annotators) {
    annotators.push_back({{"annotator_id", a.annotator_id},
                          {"behavior", a.behavior ? behavior_to_json(*a.behavior) : json(nullptr)},
                          {"assisted", opt_metrics(a.assisted)},
                          {"unassisted", opt_metrics(a.unassisted)}});
  }
  json per_block = json::array();
  for (const auto &b : report.per_block) {
    per_block.push_back({{"annotator_id", b.annotator_id},
                         {"block", b.block},
                         {"training", b.training},
                         {"condition", condition_to_json(b.condition)},
                         {"documents", b.summary.per_document.size()},
                         {"metrics", opt_metrics(b.metrics)}});
  }
  return {{"plan", plan_to_json(report.plan)},
          {"annotators", std::move(annotators)},
          {"per_block", std::move(per_block)},
          {"condition_comparison",
           report.condition_comparison
               ? condition_report_to_json(*report.condition_comparison)
               : json(nullptr)}};
}

json experiment_submission_to_json(const ExperimentSubmission &s) {
  return {{"block", s.block},
          {"training", s.training},
          {"condition", condition_to_json(s.condition)},
          {"set", annotation_set_to_json(s.set)}};
}

ExperimentSubmission experiment_submission_from_json(const json &j,
                                                     const Corpus &corpus) {
  try {
    ExperimentSubmission s;
    s.block = j.at("block").get<std::string>();
    s.training = j.value("training", false);
    s.condition = condition_from_json(j.at("condition"));
    const auto &set = j.at("set");
    const auto doc_id = set.at("document_id").get<std::string>();
    const Document *doc = corpus.find_document(doc_id);
    if (!doc) throw ParseError("unknown document '" + doc_id + "'");
    s.set = annotation_set_from_json(set, *doc);
    return s;
  } catch (const json::exception &e) {
    throw ParseError(std::string("experiment submission: ") + e.what());
  }
}

}  // namespace annocycle

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

#include "annocycle/service.h"

#include <algorithm>
#include <cstdio>
#include <mutex>
#include <set>
#include <sstream>

#include "annocycle/errors.h"
#include "annocycle/http_ml_unit.h"

namespace annocycle {

using nlohmann::json;

struct Service::Slot {
  mutable std::shared_mutex mu;
  ProjectRecord record;
  std::unique_ptr<MlUnit> unit;
  bool needs_training = false;
  std::optional<std::string> training_error;
};

namespace {

// Thrown inside handlers to leave with a specific status.
struct HttpError {
  int status;
  json body;
};

[[noreturn]] void fail(int status, std::string_view kind, const std::string &message) {
  throw HttpError{status, error_body(kind, message)};
}

[[noreturn]] void fail(int status, const Error &e) {
  json body = error_body(e.kind(), e.what());
  if (const auto *p = dynamic_cast<const ParseError *>(&e); p && p->record_index() >= 0)
    body["error"]["record_index"] = p->record_index();
  if (const auto *p = dynamic_cast<const IncompleteIterationError *>(&e)) {
    body["error"]["missing"] = p->missing();
    body["error"]["unexpected"] = p->unexpected();
  }
  if (const auto *p = dynamic_cast<const PredictionError *>(&e))
    body["error"]["document_id"] = p->document_id();
  throw HttpError{status, std::move(body)};
}

json parse_body(const Request &r) {
  try {
    json j = json::parse(r.body);
    if (!j.is_object()) fail(400, "parse_error", "request body must be a JSON object");
    return j;
  } catch (const json::parse_error &e) {
    fail(400, "parse_error", std::string("malformed JSON: ") + e.what());
  }
}

std::vector<std::string> split_path(const std::string &path) {
  std::vector<std::string> out;
  std::string part;
  std::istringstream in(path);
  while (std::getline(in, part, '/'))
    if (!part.empty()) out.push_back(part);
  return out;
}

json labels_json(const std::vector<Label> &labels) {
  json out = json::array();
  for (const auto &l : labels) out.push_back(label_to_json(l));
  return out;
}

json tokens_json(const Document &doc) { return document_to_json(doc, false).at("tokens"); }

json pre_json(const Document &doc, const std::vector<PreAnnotation> &pre) {
  return pre_annotations_to_json(doc.id, pre, false).at("annotations");
}

json plan_payload(const ProjectRecord &rec, const IterationPlan &plan) {
  json docs = json::array();
  for (const auto &id : plan.document_ids) {
    const Document &doc = *rec.state.find_document(id);
    const auto &pre = plan.pre_annotations.at(id);
    docs.push_back({{"document_id", id},
                    {"text", doc.text},
                    {"tokens", tokens_json(doc)},
                    {"pre_annotations", pre_json(doc, pre)},
                    {"confidence", document_confidence(pre)}});
  }
  json strategy = {{"name", strategy_name(plan.strategy.kind)}};
  if (plan.strategy.kind == SelectionKind::kRandom) strategy["seed"] = plan.strategy.seed;
  return {{"project_id", rec.id},
          {"iteration_index", plan.iteration_index},
          {"strategy", std::move(strategy)},
          {"labels", labels_json(rec.state.labels)},
          {"documents", std::move(docs)},
          {"complete", false}};
}

json project_summary(const ProjectRecord &rec) {
  std::size_t gold_entities = 0;
  for (const auto &d : rec.state.corpus) gold_entities += d.gold ? d.gold->size() : 0;
  return {{"project_id", rec.id},
          {"created_at", format_timestamp(rec.created_at)},
          {"revision", rec.revision},
          {"documents", rec.state.corpus.size()},
          {"gold_entities", gold_entities},
          {"annotated", rec.state.annotated.size()},
          {"pending", rec.state.pending ? rec.state.pending->document_ids.size() : 0},
          {"unannotated", rec.state.unannotated_ids().size()},
          {"iteration_counter", rec.state.iteration_counter}};
}

std::optional<std::string> query(const Request &r, const std::string &key) {
  auto it = r.query.find(key);
  if (it == r.query.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

std::string sequential_id(const char *prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%04zu", prefix, n);
  return buf;
}

}  // namespace

json error_body(std::string_view kind, const std::string &message) {
  return {{"error", {{"kind", kind}, {"message", message}}}};
}

Service::Service(std::filesystem::path data_dir, ServiceOptions options)
    : options_(std::move(options)), store_(std::move(data_dir), options_.store) {
  for (auto &rec : store_.load_all()) {
    auto s = std::make_shared<Slot>();
    s->needs_training = !rec.state.annotated.empty();
    s->record = std::move(rec);
    s->unit = make_unit(s->record);
    projects_[s->record.id] = std::move(s);
  }
}

Service::~Service() = default;

std::size_t Service::project_count() const {
  std::shared_lock lock(projects_mu_);
  return projects_.size();
}

ProjectRecord Service::record(const std::string &project_id) const {
  auto s = slot(project_id);
  std::shared_lock lock(s->mu);
  return s->record;
}

std::shared_ptr<Service::Slot> Service::slot(const std::string &project_id) const {
  std::shared_lock lock(projects_mu_);
  auto it = projects_.find(project_id);
  if (it == projects_.end()) throw NotFoundError("unknown project '" + project_id + "'");
  return it->second;
}

std::unique_ptr<MlUnit> Service::make_unit(const ProjectRecord &rec) const {
  if (const auto *s = std::get_if<SimulatedBinding>(&rec.state.ml_unit))
    return simulated_ml_unit(rec.corpus(), s->target_recall, s->seed);
  return std::make_unique<HttpMlUnit>(std::get<ExternalBinding>(rec.state.ml_unit).base_url,
                                      rec.state.labels, options_.ml_timeout);
}

Applied Service::commit(Slot &s, json event) {
  Applied applied = apply_event(s.record, event);
  store_.commit(applied.record, event);
  s.record = applied.record;
  return applied;
}

void Service::retrain(Slot &s) {
  if (!s.unit->supports_training()) {
    s.needs_training = false;
    return;
  }
  try {
    const auto examples = s.record.state.training_set();
    s.unit->train(examples);
    s.needs_training = false;
    s.training_error.reset();
  } catch (const Error &e) {
    s.needs_training = true;
    s.training_error = e.what();
  }
}

Response Service::handle(const Request &r) {
  const auto parts = split_path(r.path);
  const auto n = parts.size();
  auto is = [&](std::size_t i, const char *s) { return i < n && parts[i] == s; };
  try {
    try {
      if (n == 1 && is(0, "health") && r.method == "GET") return {200, {{"status", "ok"}}};
      if (n == 1 && is(0, "config") && r.method == "GET")
        return {200, {{"api_base_url", options_.public_base_url}}};
      if (!is(0, "projects")) fail(404, "not_found", "no route for " + r.path);
      if (n == 1) {
        if (r.method == "POST") return create_project(r);
        if (r.method == "GET") return list_projects();
        fail(405, "method_not_allowed", r.method + " " + r.path);
      }
      const std::string &p = parts[1];
      if (n == 2 && r.method == "GET") return get_project(p);
      if (n == 3 && is(2, "iterations") && r.method == "POST") return open_iteration(p, r);
      if (n == 4 && is(2, "iterations") && is(3, "current") && r.method == "GET")
        return current_iteration(p);
      if (n == 5 && is(2, "iterations") && is(3, "current") && is(4, "complete") &&
          r.method == "POST")
        return complete_iteration(p);
      if (n == 4 && is(2, "documents") && r.method == "GET") return get_document(p, parts[3]);
      if (n == 5 && is(2, "documents") && is(4, "annotations") && r.method == "PUT")
        return submit(p, parts[3], r);
      if (n == 3 && is(2, "stats") && r.method == "GET") return stats(p, r);
      if (n == 3 && is(2, "experiments") && r.method == "POST") return create_experiment(p, r);
      if (n == 3 && is(2, "experiments") && r.method == "GET") return list_experiments(p);
      if (n == 5 && is(2, "experiments") && is(4, "report") && r.method == "GET")
        return experiment_report(p, parts[3]);
      fail(404, "not_found", "no route for " + r.method + " " + r.path);
    } catch (const NotFoundError &e) {
      fail(404, e);
    } catch (const ConflictError &e) {
      fail(409, e);
    } catch (const IncompleteIterationError &e) {
      fail(409, e);
    } catch (const PredictionError &e) {
      fail(502, e);
    } catch (const StorageError &e) {
      fail(500, e);
    } catch (const Error &e) {
      fail(400, e);
    } catch (const json::exception &e) {
      fail(400, "parse_error", e.what());
    }
  } catch (const HttpError &e) {
    return {e.status, e.body};
  } catch (const std::exception &e) {
    return {500, error_body("internal", e.what())};
  }
}

Response Service::create_project(const Request &r) {
  json body = parse_body(r);
  MlBinding binding = SimulatedBinding{1.0, 0};
  if (body.contains("ml_unit")) {
    binding = ml_binding_from_json(body.at("ml_unit"));
    body.erase("ml_unit");
  }
  const Corpus corpus = corpus_from_json(body);

  std::unique_lock lock(projects_mu_);
  std::string id;
  for (std::size_t i = projects_.size() + 1;; ++i) {
    id = sequential_id("p", i);
    if (!projects_.count(id) && !std::filesystem::exists(store_.project_dir(id))) break;
  }
  auto s = std::make_shared<Slot>();
  commit(*s, created_event(id, options_.clock(), corpus, binding));
  s->unit = make_unit(s->record);
  projects_[id] = s;
  return {201, {{"project_id", id}}};
}

Response Service::list_projects() const {
  std::vector<std::shared_ptr<Slot>> slots;
  {
    std::shared_lock lock(projects_mu_);
    for (const auto &[id, s] : projects_) slots.push_back(s);
  }
  json out = json::array();
  for (const auto &s : slots) {
    std::shared_lock lock(s->mu);
    out.push_back(project_summary(s->record));
  }
  return {200, {{"projects", std::move(out)}}};
}

Response Service::get_project(const std::string &p) const {
  auto s = slot(p);
  std::shared_lock lock(s->mu);
  const auto &rec = s->record;
  json j = project_summary(rec);
  j["labels"] = labels_json(rec.state.labels);
  j["ml_unit"] = ml_binding_to_json(rec.state.ml_unit);
  j["current_iteration"] =
      rec.state.pending ? json(rec.state.pending->iteration_index) : json(nullptr);
  json experiments = json::array();
  for (const auto &e : rec.experiments) experiments.push_back(e.id);
  j["experiments"] = std::move(experiments);
  j["training_error"] = s->training_error ? json(*s->training_error) : json(nullptr);
  return {200, std::move(j)};
}

Response Service::open_iteration(const std::string &p, const Request &r) {
  const json body = parse_body(r);
  if (!body.contains("size") || !is_offset(body.at("size")) || body.at("size").get<std::size_t>() == 0)
    fail(400, "input_error", "\"size\" must be a positive integer");
  const std::size_t size = body.at("size").get<std::size_t>();
  std::uint64_t seed = 0;
  if (body.contains("seed")) {
    if (!is_offset(body.at("seed"))) fail(400, "input_error", "\"seed\" must be a non-negative integer");
    seed = body.at("seed").get<std::uint64_t>();
  }
  const SelectionStrategy strategy =
      parse_strategy(body.value("strategy", std::string("sequential")), seed);

  auto s = slot(p);
  std::unique_lock lock(s->mu);
  const auto &rec = s->record;
  if (rec.state.pending) {
    throw ConflictError("iteration " + std::to_string(rec.state.pending->iteration_index) +
                        " is still pending");
  }
  if (rec.state.unannotated_ids().empty()) {
    return {200,
            {{"project_id", rec.id},
             {"iteration_index", rec.state.iteration_counter},
             {"labels", labels_json(rec.state.labels)},
             {"documents", json::array()},
             {"complete", true}}};
  }
  if (s->needs_training) {
    retrain(*s);
    if (s->needs_training) throw PredictionError("", "ML unit training failed: " + *s->training_error);
  }
  auto [state, plan] = annocycle::open_iteration(rec.state, strategy, size, *s->unit);
  commit(*s, iteration_opened_event(plan, options_.clock()));
  return {200, plan_payload(s->record, plan)};
}

Response Service::current_iteration(const std::string &p) const {
  auto s = slot(p);
  std::shared_lock lock(s->mu);
  const auto &rec = s->record;
  if (!rec.state.pending) throw NotFoundError("no pending iteration");
  json j = plan_payload(rec, *rec.state.pending);
  json submitted = json::array();
  for (const auto &sub : rec.submissions)
    submitted.push_back({{"document_id", sub.document_id}, {"annotator_id", sub.annotator_id}});
  j["submitted"] = std::move(submitted);
  return {200, std::move(j)};
}

Response Service::complete_iteration(const std::string &p) {
  auto s = slot(p);
  std::unique_lock lock(s->mu);
  if (!s->record.state.pending) throw ConflictError("no pending iteration");
  const auto planned = s->record.state.pending->document_ids;
  const Applied applied = commit(*s, completed_event(options_.clock()));
  if (!applied.merged->empty()) retrain(*s);
  json returned = json::array();
  for (const auto &id : planned)
    if (!s->record.state.is_annotated(id)) returned.push_back(id);
  return {200,
          {{"iteration_completed", true},
           {"merged", *applied.merged},
           {"returned", std::move(returned)},
           {"iteration_counter", s->record.state.iteration_counter},
           {"revision", s->record.revision}}};
}

Response Service::get_document(const std::string &p, const std::string &d) const {
  auto s = slot(p);
  std::shared_lock lock(s->mu);
  const auto &rec = s->record;
  const Document *doc = rec.state.find_document(d);
  if (!doc) throw NotFoundError("unknown document '" + d + "'");
  json j = {{"document_id", doc->id},
            {"text", doc->text},
            {"tokens", tokens_json(*doc)},
            {"labels", labels_json(rec.state.labels)}};
  if (rec.state.is_pending(d)) {
    j["status"] = "pending";
    j["iteration_index"] = rec.state.pending->iteration_index;
    j["pre_annotations"] = pre_json(*doc, rec.state.pending->pre_annotations.at(d));
  } else if (rec.state.is_annotated(d)) {
    j["status"] = "annotated";
    j["annotations"] = annotation_set_to_json(rec.state.annotated.at(d));
  } else {
    j["status"] = "unannotated";
  }
  return {200, std::move(j)};
}

Response Service::submit(const std::string &p, const std::string &d, const Request &r) {
  json body = parse_body(r);
  if (body.contains("document_id") && body.at("document_id") != d)
    fail(400, "input_error", "document_id in the body does not match the URL");
  body["document_id"] = d;

  auto s = slot(p);
  std::unique_lock lock(s->mu);
  const auto &rec = s->record;
  const Document *doc = rec.state.find_document(d);
  if (!doc) throw NotFoundError("unknown document '" + d + "'");
  if (!rec.state.is_pending(d))
    throw ConflictError("document '" + d + "' is not in the pending iteration");
  AnnotationSet set;
  try {
    set = annotation_set_from_json(body, *doc);
    validate_annotation_set(set, *doc, rec.state.labels);
  } catch (const AlignmentError &e) {
    fail(422, e);
  } catch (const InputError &e) {
    fail(422, e);
  }
  const Applied applied = commit(*s, submission_event(set, options_.clock()));
  if (applied.merged) retrain(*s);

  json remaining = json::array();
  if (s->record.state.pending) {
    std::set<std::string> done;
    for (const auto &sub : s->record.submissions) done.insert(sub.document_id);
    for (const auto &id : s->record.state.pending->document_ids)
      if (!done.count(id)) remaining.push_back(id);
  }
  return {200,
          {{"iteration_completed", applied.merged.has_value()},
           {"iteration_counter", s->record.state.iteration_counter},
           {"revision", s->record.revision},
           {"remaining", std::move(remaining)}}};
}

Response Service::stats(const std::string &p, const Request &r) const {
  auto s = slot(p);
  std::shared_lock lock(s->mu);
  const auto &rec = s->record;
  const auto annotator = query(r, "annotator");
  const auto block = query(r, "block");
  const auto experiment = query(r, "experiment");
  const bool any_gold = std::any_of(rec.state.corpus.begin(), rec.state.corpus.end(),
                                    [](const Document &doc) { return doc.has_gold(); });
  if (!any_gold) throw ConflictError("project has no gold annotations; stats are undefined");

  std::vector<ScoringInput> inputs;
  std::optional<ConditionReport> comparison;
  if (experiment) {
    const StoredExperiment *e = rec.find_experiment(*experiment);
    if (!e) throw NotFoundError("unknown experiment '" + *experiment + "'");
    std::vector<ExperimentSubmission> selected;
    for (const auto &sub : e->submissions) {
      if (annotator && sub.set.annotator_id != *annotator) continue;
      if (block && sub.block != *block) continue;
      selected.push_back(sub);
      const Document &doc = *rec.state.find_document(sub.set.document_id);
      inputs.push_back({doc.id, sub.set.annotator_id, sub.set.annotations, *doc.gold,
                        annotation_seconds(sub.set)});
    }
    const Corpus corpus = rec.corpus();
    comparison = compare_submissions(corpus, selected);
  } else {
    if (block) fail(400, "input_error", "block filter needs an experiment");
    for (const auto &doc : rec.state.corpus) {
      auto it = rec.state.annotated.find(doc.id);
      if (it == rec.state.annotated.end() || !doc.gold) continue;
      if (annotator && it->second.annotator_id != *annotator) continue;
      inputs.push_back({doc.id, it->second.annotator_id, it->second.annotations, *doc.gold,
                        annotation_seconds(it->second)});
    }
  }
  return {200, score_report_to_json(score_documents(inputs), comparison)};
}

Response Service::create_experiment(const std::string &p, const Request &r) {
  const json body = parse_body(r);
  auto s = slot(p);
  std::unique_lock lock(s->mu);
  const auto &rec = s->record;
  const Corpus corpus = rec.corpus();

  StoredExperiment e;
  e.id = sequential_id("e", rec.experiments.size() + 1);
  e.created_at = options_.clock();
  if (!body.contains("plan")) fail(400, "input_error", "\"plan\" is required");
  e.plan = plan_from_config(body.at("plan"), corpus.documents);
  try {
    validate_plan(e.plan, corpus);
  } catch (const InputError &err) {
    fail(422, err);
  }

  if (body.contains("submissions")) {
    std::map<std::string, const Block *> blocks;
    if (e.plan.training_block) blocks[e.plan.training_block->name] = &*e.plan.training_block;
    for (const auto &b : e.plan.blocks) blocks[b.name] = &b;
    for (const auto &j : body.at("submissions")) {
      ExperimentSubmission sub;
      try {
        sub = experiment_submission_from_json(j, corpus);
        auto it = blocks.find(sub.block);
        if (it == blocks.end()) throw InputError("unknown block '" + sub.block + "'");
        const auto &ids = it->second->document_ids;
        if (std::find(ids.begin(), ids.end(), sub.set.document_id) == ids.end()) {
          throw InputError("document '" + sub.set.document_id + "' is not in block '" +
                           sub.block + "'");
        }
        if (sub.condition != it->second->condition)
          throw InputError("submission condition differs from block '" + sub.block + "'");
        validate_annotation_set(sub.set, *corpus.find_document(sub.set.document_id),
                                corpus.labels);
      } catch (const InputError &err) {
        fail(422, err);
      } catch (const AlignmentError &err) {
        fail(422, err);
      }
      e.submissions.push_back(std::move(sub));
    }
    for (const auto &b : body.value("behaviors", json::array()))
      e.behaviors.push_back(behavior_from_json(b));
  } else {
    if (body.contains("behaviors")) {
      for (const auto &b : body.at("behaviors")) e.behaviors.push_back(behavior_from_json(b));
    } else {
      const std::size_t n = body.value("annotators", std::size_t{1});
      e.behaviors = cohort_behaviors(behavior_from_json(body.value("behavior", json::object())),
                                     n, body.value("seed", std::uint64_t{0}),
                                     body.value("spread", 0.0));
    }
    if (e.behaviors.empty()) fail(400, "input_error", "experiment needs at least one annotator");
    e.submissions = run_experiment(e.plan, corpus, e.behaviors).submissions;
  }
  const std::string id = e.id;
  commit(*s, experiment_event(e, e.created_at));
  return {201,
          {{"experiment_id", id},
           {"report", "/projects/" + p + "/experiments/" + id + "/report"}}};
}

Response Service::list_experiments(const std::string &p) const {
  auto s = slot(p);
  std::shared_lock lock(s->mu);
  json out = json::array();
  for (const auto &e : s->record.experiments) {
    out.push_back({{"experiment_id", e.id},
                   {"created_at", format_timestamp(e.created_at)},
                   {"blocks", e.plan.blocks.size()},
                   {"submissions", e.submissions.size()}});
  }
  return {200, {{"experiments", std::move(out)}}};
}

Response Service::experiment_report(const std::string &p, const std::string &id) const {
  auto s = slot(p);
  std::shared_lock lock(s->mu);
  const StoredExperiment *e = s->record.find_experiment(id);
  if (!e) throw NotFoundError("unknown experiment '" + id + "'");
  return {200, experiment_report_to_json(rebuild_experiment_report(
                   e->plan, s->record.corpus(), e->behaviors, e->submissions))};
}

}  // namespace annocycle
